use thiserror::Error;

/// Errors raised by field construction, solvers and scenario drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unitarity violated at step {step}: norm drift {drift:e}")]
    Unitarity { step: usize, drift: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("stability limit exceeded: dt = {dt:e} > {limit:e} ({scheme})")]
    Stability {
        dt: f64,
        limit: f64,
        scheme: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pointer shift {shift:e} leaves the y-domain; enlarge the y-extent to at least {required:e}")]
    PointerOutOfDomain { shift: f64, required: f64 },

    #[error("conditional wave function undefined: slice norm {norm:e} below threshold")]
    ConditionalUndefined { norm: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

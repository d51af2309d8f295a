//! Config-driven batch runner for the `madelung-lab` scenarios.
//!
//! `run` executes one scenario and writes its CSVs plus a `manifest.json`; `sweep` repeats a
//! run over values of one parameter; `report` folds a tree of manifests into one verdict.

pub mod config;
pub mod error;
pub mod manifest;
pub mod report;
pub mod scenario;
pub mod sweep;

pub use config::{ExperimentConfig, Scenario};
pub use error::CliError;
pub use manifest::RunManifest;

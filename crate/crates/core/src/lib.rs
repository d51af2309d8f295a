//! Numerical laboratory for two-fluid Madelung hydrodynamics.
//!
//! The crate builds everything on uniform periodic grids:
//!
//! * [`field`], [`spectral`], [`interp`]: field containers and discrete calculus;
//! * [`oracle`]: split-operator Schrödinger propagation, stationary states and the
//!   pointer-measurement model;
//! * [`madelung`]: polar decomposition, quantum potential and direct Madelung integration;
//! * [`twofluid`]: diffusion with jump resets and the averaged osmotic acceleration;
//! * [`bohm`]: guiding-equation trajectories, equivariance and relaxation diagnostics;
//! * [`conditional`]: two-particle conditional wave functions and per-particle guidance.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64` aliases below fix
//! the scalar to `f64`, which is what the tolerances in the tests assume.

pub mod bohm;
pub mod conditional;
pub mod constants;
pub mod error;
pub mod field;
pub mod grid;
pub mod interp;
pub mod madelung;
pub mod oracle;
pub mod scalar;
pub mod spectral;
pub mod twofluid;

pub use constants::Constants;
pub use error::{Error, Result};
pub use field::{ScalarField, VectorField, WaveField};
pub use grid::GridSpec;
pub use num_complex::Complex;
pub use scalar::Real;

pub type Grid64 = GridSpec<f64>;
pub type ScalarField64 = ScalarField<f64>;
pub type VectorField64 = VectorField<f64>;
pub type WaveField64 = WaveField<f64>;
pub type Complex64 = Complex<f64>;

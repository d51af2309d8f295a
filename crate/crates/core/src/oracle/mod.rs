//! Reference Schrödinger dynamics: the ground truth other modules are checked against.

mod eigen;
mod hermite;
mod measurement;
mod potential;
mod propagator;
mod series;

pub use eigen::{stationary_states, Eigenpair};
pub use hermite::{harmonic_energy, harmonic_state, hermite_function};
pub use measurement::{
    density_mass_between, density_mean, pointer_marginal, pointer_measurement_evolve,
    pointer_measurement_stepped, product_initial_state, GaussianPointer,
};
pub use potential::Potential;
pub use propagator::{
    energy, evolve_with, probability_current, spectral_tail_fraction, split_step_evolve,
    unitarity_limit, Dispersion, PropagatorState, SplitStep,
};
pub use series::{OracleSeries, StaticSeries, StoredSeries, WaveSeries};

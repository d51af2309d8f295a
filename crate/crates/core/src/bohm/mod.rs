//! Bohmian trajectories `dx/dt = (ħ/m) Im(∇Ψ/Ψ)` and ensemble statistics.

mod ensemble;
mod experiments;
mod guidance;
mod histogram;
mod sampling;

pub use ensemble::{
    propagate_ensemble, Snapshot, TrajectoryEnsemble, DEGRADED_FRACTION, MAX_REFINE_DEPTH,
    REFINE_TOLERANCE,
};
pub(crate) use ensemble::{refine_tolerance, rk4_adaptive, time_weights};
pub use experiments::{
    relaxation_state, run_equivariance, run_relaxation, EquivarianceReport, EquivarianceSetup,
    RelaxationReport, RelaxationSetup,
};
pub use guidance::{guiding_velocity, GuidanceField, GuidanceMode, GuidanceStream, Velocity};
pub use histogram::{
    coarse_grained_h, equivariance_distance, histogram_l1, relative_entropy, HistogramGrid,
    MIN_CELL_SPACINGS, MIN_EQUIVARIANCE_SAMPLES,
};
pub use sampling::{ks_statistic, quantile_ensemble, sample_equilibrium, stream_rng};

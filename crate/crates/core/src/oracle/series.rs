//! Sequential sources of wave-function snapshots at fixed time intervals.

use num_traits::Float;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::{ScalarField, WaveField};
use crate::oracle::propagator::{unitarity_limit, Dispersion, SplitStep};
use crate::scalar::Real;

/// A stream of snapshots `Ψ(t₀), Ψ(t₀ + Δ), Ψ(t₀ + 2Δ), …`.
pub trait WaveSeries<T: Real> {
    /// Time between consecutive snapshots.
    fn interval(&self) -> T;
    /// The next snapshot; the first call yields the initial field.
    fn next_wave(&mut self) -> Result<WaveField<T>>;
}

/// Snapshots produced on demand by a Strang propagator.
pub struct OracleSeries<T: Real> {
    stepper: SplitStep<T>,
    current: WaveField<T>,
    norm0: T,
    started: bool,
    steps: usize,
}

impl<T: Real> OracleSeries<T> {
    pub fn new(
        initial: &WaveField<T>,
        potential: &ScalarField<T>,
        interval: T,
        constants: &Constants<T>,
    ) -> Result<Self> {
        Self::with_dispersion(
            initial,
            potential,
            interval,
            constants,
            Dispersion::Spectral,
        )
    }

    pub fn with_dispersion(
        initial: &WaveField<T>,
        potential: &ScalarField<T>,
        interval: T,
        constants: &Constants<T>,
        dispersion: Dispersion,
    ) -> Result<Self> {
        initial.grid().ensure_same(potential.grid())?;
        let current = initial.normalized()?;
        Ok(Self {
            stepper: SplitStep::new(potential, interval, constants, dispersion)?,
            norm0: current.norm_sqr(),
            current,
            started: false,
            steps: 0,
        })
    }
}

impl<T: Real> WaveSeries<T> for OracleSeries<T> {
    fn interval(&self) -> T {
        self.stepper.dt()
    }

    fn next_wave(&mut self) -> Result<WaveField<T>> {
        if self.started {
            self.stepper.step(self.current.values_mut());
            self.steps += 1;
            let drift = Float::abs(self.current.norm_sqr() - self.norm0);
            if !(drift <= unitarity_limit()) {
                return Err(Error::Unitarity {
                    step: self.steps,
                    drift: drift.as_f64(),
                });
            }
        }
        self.started = true;
        Ok(self.current.clone())
    }
}

/// Pre-computed snapshots; errors once exhausted.
#[derive(Debug, Clone)]
pub struct StoredSeries<T> {
    waves: Vec<WaveField<T>>,
    interval: T,
    cursor: usize,
}

impl<T: Real> StoredSeries<T> {
    pub fn new(waves: Vec<WaveField<T>>, interval: T) -> Self {
        Self {
            waves,
            interval,
            cursor: 0,
        }
    }
}

impl<T: Real> WaveSeries<T> for StoredSeries<T> {
    fn interval(&self) -> T {
        self.interval
    }

    fn next_wave(&mut self) -> Result<WaveField<T>> {
        let w = self.waves.get(self.cursor).cloned().ok_or_else(|| {
            Error::Config(format!(
                "wave series exhausted after {} snapshots",
                self.cursor
            ))
        })?;
        self.cursor += 1;
        Ok(w)
    }
}

/// The same field at every time: for stationary or frozen-field runs.
#[derive(Debug, Clone)]
pub struct StaticSeries<T> {
    wave: WaveField<T>,
    interval: T,
}

impl<T: Real> StaticSeries<T> {
    pub fn new(wave: WaveField<T>, interval: T) -> Self {
        Self { wave, interval }
    }
}

impl<T: Real> WaveSeries<T> for StaticSeries<T> {
    fn interval(&self) -> T {
        self.interval
    }

    fn next_wave(&mut self) -> Result<WaveField<T>> {
        Ok(self.wave.clone())
    }
}

//! Strang-split spectral propagation of the time-dependent Schrödinger equation.

use num_complex::Complex;
use num_traits::Float;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField, WaveField};
use crate::grid::GridSpec;
use crate::oracle::potential::Potential;
use crate::scalar::Real;
use crate::spectral::{fd_second_derivative_symbol, Spectral};

/// Kinetic-energy symbol used by the propagator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dispersion {
    /// `ħ² k² / 2m`: exact continuum kinetic energy on the band-limited grid.
    #[default]
    Spectral,
    /// Symbol of the 3-point finite-difference Laplacian; matches the Hamiltonian used by
    /// [`stationary_states`](crate::oracle::stationary_states).
    FiniteDifference,
}

/// Norm drift that aborts a propagation.
pub fn unitarity_limit<T: Real>() -> T {
    T::tol(1e-6, 1e3)
}

/// One Strang step: half potential kick, full kinetic drift in Fourier space, half kick.
pub struct SplitStep<T: Real> {
    spectral: Spectral<T>,
    half_kick: Vec<Complex<T>>,
    drift: Vec<Complex<T>>,
    dt: T,
}

impl<T: Real> std::fmt::Debug for SplitStep<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitStep").field("dt", &self.dt).finish()
    }
}

impl<T: Real> SplitStep<T> {
    pub fn new(
        potential: &ScalarField<T>,
        dt: T,
        constants: &Constants<T>,
        dispersion: Dispersion,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(Error::Config(format!(
                "time step must be positive, got {dt}"
            )));
        }
        potential.ensure_finite()?;
        let grid = *potential.grid();
        let spectral = Spectral::new(&grid);
        let hbar = constants.hbar;
        let half = T::lit(0.5);
        let half_kick = potential
            .values()
            .iter()
            .map(|&u| Complex::from_polar(T::one(), -u * dt * half / hbar))
            .collect();

        let symbols: Vec<Vec<T>> = (0..grid.dims())
            .map(|a| match dispersion {
                Dispersion::Spectral => spectral.k_squared(a).to_vec(),
                Dispersion::FiniteDifference => {
                    fd_second_derivative_symbol(grid.points(a), grid.extent(a))
                        .into_iter()
                        .map(|s| -s)
                        .collect()
                }
            })
            .collect();
        let kin = hbar / (T::lit(2.0) * constants.mass);
        let drift = (0..grid.len())
            .map(|idx| {
                let (ix, iy) = grid.unflatten(idx);
                let mut k2 = symbols[0][ix];
                if grid.dims() == 2 {
                    k2 += symbols[1][iy];
                }
                Complex::from_polar(T::one(), -kin * k2 * dt)
            })
            .collect();
        Ok(Self {
            spectral,
            half_kick,
            drift,
            dt,
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn grid(&self) -> &GridSpec<T> {
        self.spectral.grid()
    }

    /// Advances `psi` by one step in place.
    pub fn step(&self, psi: &mut [Complex<T>]) {
        for (z, k) in psi.iter_mut().zip(&self.half_kick) {
            *z = *z * *k;
        }
        self.spectral.fft(psi, false);
        for (z, k) in psi.iter_mut().zip(&self.drift) {
            *z = *z * *k;
        }
        self.spectral.fft(psi, true);
        for (z, k) in psi.iter_mut().zip(&self.half_kick) {
            *z = *z * *k;
        }
    }
}

/// Wave function, clock and constants of a running propagation.
#[derive(Debug, Clone)]
pub struct PropagatorState<T> {
    pub psi: WaveField<T>,
    pub t: T,
    pub dt: T,
    pub constants: Constants<T>,
}

impl<T: Real> PropagatorState<T> {
    /// Starts at `t = 0` with `psi` normalized.
    pub fn new(psi: &WaveField<T>, dt: T, constants: Constants<T>) -> Result<Self> {
        Ok(Self {
            psi: psi.normalized()?,
            t: T::zero(),
            dt,
            constants,
        })
    }
}

/// Evolves `state` by `steps` Strang steps of size `state.dt` under `potential`.
///
/// Aborts with [`Error::Unitarity`] if the norm drifts by more than [`unitarity_limit`].
pub fn split_step_evolve<T: Real>(
    state: PropagatorState<T>,
    potential: &Potential<T>,
    steps: usize,
) -> Result<PropagatorState<T>> {
    let u = potential.realize(state.psi.grid(), &state.constants)?;
    let stepper = SplitStep::new(&u, state.dt, &state.constants, Dispersion::Spectral)?;
    evolve_with(&stepper, state, steps)
}

/// Like [`split_step_evolve`] but reusing a prepared stepper.
pub fn evolve_with<T: Real>(
    stepper: &SplitStep<T>,
    state: PropagatorState<T>,
    steps: usize,
) -> Result<PropagatorState<T>> {
    state.psi.grid().ensure_same(stepper.grid())?;
    state.psi.ensure_finite()?;
    let PropagatorState {
        psi, t, constants, ..
    } = state;
    let grid = *psi.grid();
    let norm0 = psi.norm_sqr();
    let limit = unitarity_limit::<T>();
    let mut values = psi.into_values();
    let dv = grid.cell_volume();
    for step in 0..steps {
        stepper.step(&mut values);
        let n: T = values.iter().map(|z| z.norm_sqr()).sum::<T>() * dv;
        let drift = Float::abs(n - norm0);
        if !(drift <= limit) {
            return Err(Error::Unitarity {
                step: step + 1,
                drift: drift.as_f64(),
            });
        }
    }
    let t = t + stepper.dt() * T::from_usize_lossy(steps);
    Ok(PropagatorState {
        psi: WaveField::new(grid, values)?,
        t,
        dt: stepper.dt(),
        constants,
    })
}

/// `⟨H⟩ = Re ∫ Ψ* (-ħ²/2m ∇² + U) Ψ dV` with a spectral Laplacian.
pub fn energy<T: Real>(
    psi: &WaveField<T>,
    potential: &ScalarField<T>,
    constants: &Constants<T>,
) -> Result<T> {
    psi.grid().ensure_same(potential.grid())?;
    let spectral = Spectral::new(psi.grid());
    let lap = spectral.laplacian_complex(psi.values());
    let kin = -constants.hbar * constants.hbar / (T::lit(2.0) * constants.mass);
    let mut e = T::zero();
    for ((z, l), &u) in psi.values().iter().zip(&lap).zip(potential.values()) {
        e += (z.conj() * (*l * kin + *z * u)).re;
    }
    Ok(e * psi.grid().cell_volume())
}

/// Probability current `j = (ħ/m) Im(Ψ* ∇Ψ)`.
pub fn probability_current<T: Real>(
    psi: &WaveField<T>,
    constants: &Constants<T>,
) -> Result<VectorField<T>> {
    psi.ensure_finite()?;
    let spectral = Spectral::new(psi.grid());
    let hm = constants.hbar_over_mass();
    let comps = (0..psi.grid().dims())
        .map(|a| {
            let d = spectral.derivative_complex(psi.values(), a);
            psi.values()
                .iter()
                .zip(d)
                .map(|(z, dz)| hm * (z.conj() * dz).im)
                .collect()
        })
        .collect();
    VectorField::new(*psi.grid(), comps)
}

/// Fraction of `∫|Ψ̂|²` carried by modes above 90% of the Nyquist wavenumber on any axis.
/// Values near zero mean the grid resolves the wave packet's momenta.
pub fn spectral_tail_fraction<T: Real>(psi: &WaveField<T>) -> T {
    let grid = psi.grid();
    let spectral = Spectral::new(grid);
    let mut buf = psi.values().to_vec();
    spectral.fft(&mut buf, false);
    let cut: Vec<T> = (0..grid.dims())
        .map(|a| T::lit(0.81) * (T::PI() / grid.spacing(a)).powi(2))
        .collect();
    let mut total = T::zero();
    let mut tail = T::zero();
    for (idx, z) in buf.iter().enumerate() {
        let (ix, iy) = grid.unflatten(idx);
        let w = z.norm_sqr();
        total += w;
        let hi = spectral.k_squared(0)[ix] > cut[0]
            || (grid.dims() == 2 && spectral.k_squared(1)[iy] > cut[1]);
        if hi {
            tail += w;
        }
    }
    if total > T::zero() {
        tail / total
    } else {
        T::zero()
    }
}

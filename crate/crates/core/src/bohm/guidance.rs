use num_complex::Complex;
use num_traits::Float;

use crate::constants::Constants;
use crate::error::Result;
use crate::field::WaveField;
use crate::grid::GridSpec;
use crate::interp::Stencil;
use crate::madelung::{density_floor, guidance_field};
use crate::oracle::WaveSeries;
use crate::scalar::Real;
use crate::spectral::Spectral;

/// How the guiding velocity is evaluated between grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GuidanceMode {
    /// Interpolate the nodal field `v = (ħ/m) Im(Ψ*∇Ψ)/|Ψ|²`.
    #[default]
    VelocityField,
    /// Interpolate `Ψ` and `∇Ψ`, then form `(ħ/m) Im(∇Ψ/Ψ)` at the point. Interpolation is
    /// linear in `Ψ`, so slices and restrictions commute with it exactly.
    WaveGradient,
}

/// Guiding velocity at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Velocity<T> {
    pub v: [T; 2],
    /// The raw value was non-finite, fell below the density floor or exceeded the
    /// Nyquist speed, and was capped.
    pub capped: bool,
}

/// Precomputed guidance for one snapshot `Ψ(t)`.
#[derive(Debug, Clone)]
pub struct GuidanceField<T> {
    grid: GridSpec<T>,
    mode: GuidanceMode,
    hbar_over_mass: T,
    rho_floor: T,
    v_max: T,
    rho: Vec<T>,
    psi: Vec<Complex<T>>,
    grad: Vec<Vec<Complex<T>>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> GuidanceField<T> {
    pub fn new(psi: &WaveField<T>, constants: &Constants<T>, mode: GuidanceMode) -> Result<Self> {
        Self::with_spectral(psi, constants, mode, &Spectral::new(psi.grid()))
    }

    pub(crate) fn with_spectral(
        psi: &WaveField<T>,
        constants: &Constants<T>,
        mode: GuidanceMode,
        spectral: &Spectral<T>,
    ) -> Result<Self> {
        psi.ensure_finite()?;
        let grid = *psi.grid();
        let rho: Vec<T> = psi.values().iter().map(|z| z.norm_sqr()).collect();
        let rho_floor = density_floor(&rho);
        let h_min = (0..grid.dims())
            .map(|a| grid.spacing(a))
            .fold(T::infinity(), Float::min);
        let grad = (0..grid.dims())
            .map(|a| spectral.derivative_complex(psi.values(), a))
            .collect();
        let v = match mode {
            GuidanceMode::VelocityField => guidance_field(psi, constants, spectral, rho_floor)?
                .components()
                .to_vec(),
            GuidanceMode::WaveGradient => Vec::new(),
        };
        Ok(Self {
            grid,
            mode,
            hbar_over_mass: constants.hbar_over_mass(),
            rho_floor,
            v_max: constants.nyquist_speed(h_min),
            rho,
            psi: psi.values().to_vec(),
            grad,
            v,
        })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn mode(&self) -> GuidanceMode {
        self.mode
    }

    /// The cap `ħ k_Nyquist / m`.
    pub fn v_max(&self) -> T {
        self.v_max
    }

    /// Velocity at `x` (the `y` slot is ignored on 1D grids).
    #[inline]
    pub fn velocity_at(&self, x: [T; 2]) -> Velocity<T> {
        let st = Stencil::new_unchecked(&self.grid, x[0], x[1]);
        let dims = self.grid.dims();
        let mut v = [T::zero(); 2];
        let mut bad = st.apply(&self.rho) <= self.rho_floor;
        match self.mode {
            GuidanceMode::VelocityField => {
                for (a, o) in v.iter_mut().enumerate().take(dims) {
                    *o = st.apply(&self.v[a]);
                }
            }
            GuidanceMode::WaveGradient => {
                let p = st.apply(&self.psi);
                bad |= p.norm_sqr() <= self.rho_floor;
                for (a, o) in v.iter_mut().enumerate().take(dims) {
                    *o = self.hbar_over_mass * (st.apply(&self.grad[a]) / p).im;
                }
            }
        }
        self.capped(v, bad)
    }

    /// Wave-gradient velocity from `Σ w_k Ψ_k` and `Σ w_k ∇Ψ_k` over `fields`, all on the
    /// grid of `self`. Used between snapshots, with Lagrange weights in time.
    pub(crate) fn blended_velocity_at(fields: [&Self; 3], w: [T; 3], x: [T; 2]) -> Velocity<T> {
        let f0 = fields[0];
        let st = Stencil::new_unchecked(&f0.grid, x[0], x[1]);
        let mut p = Complex::new(T::zero(), T::zero());
        let mut g = [Complex::new(T::zero(), T::zero()); 2];
        for (f, &wk) in fields.iter().zip(&w) {
            p = p + st.apply(&f.psi) * wk;
            for (a, ga) in g.iter_mut().enumerate().take(f0.grid.dims()) {
                *ga = *ga + st.apply(&f.grad[a]) * wk;
            }
        }
        let mut v = [T::zero(); 2];
        for (o, ga) in v.iter_mut().zip(&g).take(f0.grid.dims()) {
            *o = f0.hbar_over_mass * (*ga / p).im;
        }
        f0.capped(v, p.norm_sqr() <= f0.rho_floor)
    }

    #[inline]
    fn capped(&self, v: [T; 2], bad: bool) -> Velocity<T> {
        let speed = Float::sqrt(v[0] * v[0] + v[1] * v[1]);
        if !speed.is_finite() {
            return Velocity {
                v: [T::zero(); 2],
                capped: true,
            };
        }
        if speed > self.v_max {
            let s = self.v_max / speed;
            return Velocity {
                v: [v[0] * s, v[1] * s],
                capped: true,
            };
        }
        Velocity { v, capped: bad }
    }
}

/// `(ħ/m) Im(∇Ψ/Ψ)` at `x`, interpolated from the nodal velocity field.
pub fn guiding_velocity<T: Real>(
    psi: &WaveField<T>,
    constants: &Constants<T>,
    x: [T; 2],
) -> Result<Velocity<T>> {
    Ok(GuidanceField::new(psi, constants, GuidanceMode::VelocityField)?.velocity_at(x))
}

/// A [`WaveSeries`] sampled every `dt/2`, turned into guidance fields for RK4 stages.
pub struct GuidanceStream<T: Real, S> {
    series: S,
    constants: Constants<T>,
    mode: GuidanceMode,
    spectral: Spectral<T>,
    current: GuidanceField<T>,
    current_wave: WaveField<T>,
    t: T,
}

impl<T: Real, S: WaveSeries<T>> GuidanceStream<T, S> {
    /// Pulls the first snapshot, taken to be at time `t0`.
    pub fn new(mut series: S, constants: Constants<T>, mode: GuidanceMode, t0: T) -> Result<Self> {
        let wave = series.next_wave()?;
        let spectral = Spectral::new(wave.grid());
        let current = GuidanceField::with_spectral(&wave, &constants, mode, &spectral)?;
        Ok(Self {
            series,
            constants,
            mode,
            spectral,
            current,
            current_wave: wave,
            t: t0,
        })
    }

    /// Step size of the trajectory integrator, twice the series interval.
    pub fn dt(&self) -> T {
        T::lit(2.0) * self.series.interval()
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn current(&self) -> &GuidanceField<T> {
        &self.current
    }

    pub fn current_wave(&self) -> &WaveField<T> {
        &self.current_wave
    }

    /// Fields at `t + dt/2` and `t + dt`; afterwards the stream sits at `t + dt`.
    pub(crate) fn advance(&mut self) -> Result<(GuidanceField<T>, GuidanceField<T>)> {
        let mid = self.series.next_wave()?;
        let end = self.series.next_wave()?;
        let mid = GuidanceField::with_spectral(&mid, &self.constants, self.mode, &self.spectral)?;
        let end_field =
            GuidanceField::with_spectral(&end, &self.constants, self.mode, &self.spectral)?;
        self.t += self.dt();
        self.current_wave = end;
        Ok((mid, end_field))
    }

    pub(crate) fn replace_current(&mut self, field: GuidanceField<T>) -> GuidanceField<T> {
        std::mem::replace(&mut self.current, field)
    }
}

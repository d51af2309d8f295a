//! Polar (Madelung) form of a wave function: `Ψ = √ρ e^{iS/ħ}`, `v = ∇S/m`.
//!
//! Besides decomposition this module provides the quantum potential
//! `Q = -(ħ²/2m) ∇²√ρ/√ρ`, the residuals of the continuity and momentum equations and a
//! direct RK4 integrator of the `(R, S)` system.

use num_complex::Complex;
use num_traits::Float;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::{l2, ScalarField, VectorField, WaveField};
use crate::grid::GridSpec;
use crate::scalar::Real;
use crate::spectral::{fd_derivative_values, Spectral};

/// Density floor relative to `max ρ`.
pub const FLOOR_RELATIVE: f64 = 1e-12;
/// Residual norms are taken over nodes with `ρ > RESOLVED_FACTOR · ε_ρ`.
pub const RESOLVED_FACTOR: f64 = 1e3;
/// Largest `dt ħ / (m h²)` accepted by [`madelung_step`].
pub const CFL: f64 = 0.5;

/// `ε_ρ = 10⁻¹² max ρ`.
pub fn density_floor<T: Real>(rho: &[T]) -> T {
    let max = rho.iter().fold(T::zero(), |m, &v| Float::max(m, v));
    T::lit(FLOOR_RELATIVE) * max
}

/// Nodes with `ρ > 10³ ε_ρ`.
pub fn resolved_mask<T: Real>(rho: &ScalarField<T>) -> Vec<bool> {
    let cut = T::lit(RESOLVED_FACTOR) * density_floor(rho.values());
    rho.values().iter().map(|&r| r > cut).collect()
}

fn wrap_phase<T: Real>(d: T) -> T {
    let two_pi = T::TAU();
    let mut w = d - two_pi * Float::round(d / two_pi);
    if w <= -T::PI() {
        w += two_pi;
    }
    w
}

/// Hydrodynamic variables of a wave function.
#[derive(Debug, Clone)]
pub struct MadelungState<T> {
    rho: ScalarField<T>,
    amplitude: Vec<T>,
    /// `S` minus the linear winding ramp; periodic on the grid.
    s_periodic: Vec<T>,
    /// Mean slope of `S` per axis, `2πħ n / L`.
    winding: [T; 2],
    v: VectorField<T>,
    constants: Constants<T>,
    floor: T,
    renorm_drift: T,
}

impl<T: Real> MadelungState<T> {
    /// State from amplitude `R = √ρ` and periodic phase part; `v = ∇S/m` spectrally.
    fn from_parts(
        grid: GridSpec<T>,
        amplitude: Vec<T>,
        s_periodic: Vec<T>,
        winding: [T; 2],
        constants: Constants<T>,
        spectral: &Spectral<T>,
    ) -> Result<Self> {
        let rho: Vec<T> = amplitude.iter().map(|&r| r * r).collect();
        let floor = density_floor(&rho);
        let comps = (0..grid.dims())
            .map(|a| {
                spectral
                    .derivative(&s_periodic, a)
                    .into_iter()
                    .map(|d| (d + winding[a]) / constants.mass)
                    .collect()
            })
            .collect();
        Ok(Self {
            rho: ScalarField::new(grid, rho)?,
            amplitude,
            s_periodic,
            winding,
            v: VectorField::new(grid, comps)?,
            constants,
            floor,
            renorm_drift: T::zero(),
        })
    }

    /// Builds a state from `ρ` and `S`. `S` must be periodic up to the given per-axis slope.
    pub fn from_density_phase(
        rho: &ScalarField<T>,
        s: &ScalarField<T>,
        winding: [T; 2],
        constants: Constants<T>,
    ) -> Result<Self> {
        rho.grid().ensure_same(s.grid())?;
        rho.ensure_finite()?;
        s.ensure_finite()?;
        if let Some(index) = rho.values().iter().position(|&r| r < T::zero()) {
            return Err(Error::NonFinite {
                what: "negative density",
                index,
            });
        }
        let grid = *rho.grid();
        let s_periodic = s
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| v - ramp(&grid, &winding, i))
            .collect();
        let amplitude = rho.values().iter().map(|&r| Float::sqrt(r)).collect();
        Self::from_parts(
            grid,
            amplitude,
            s_periodic,
            winding,
            constants,
            &Spectral::new(&grid),
        )
    }

    pub fn grid(&self) -> &GridSpec<T> {
        self.rho.grid()
    }

    pub fn rho(&self) -> &ScalarField<T> {
        &self.rho
    }

    pub fn amplitude(&self) -> &[T] {
        &self.amplitude
    }

    /// Unwrapped phase action `S`.
    pub fn s(&self) -> ScalarField<T> {
        let grid = *self.grid();
        let values = self
            .s_periodic
            .iter()
            .enumerate()
            .map(|(i, &v)| v + ramp(&grid, &self.winding, i))
            .collect();
        ScalarField::new(grid, values).expect("same grid")
    }

    pub fn winding(&self) -> [T; 2] {
        self.winding
    }

    pub fn v(&self) -> &VectorField<T> {
        &self.v
    }

    pub fn constants(&self) -> &Constants<T> {
        &self.constants
    }

    /// `ε_ρ` of this state.
    pub fn floor(&self) -> T {
        self.floor
    }

    /// Nodes with `ρ < ε_ρ`, where the phase and velocity are not meaningful.
    pub fn near_node_mask(&self) -> Vec<bool> {
        self.rho.values().iter().map(|&r| r < self.floor).collect()
    }

    pub fn resolved_mask(&self) -> Vec<bool> {
        resolved_mask(&self.rho)
    }

    /// Largest `|∫ρ - 1|` removed by renormalization during [`madelung_step`].
    pub fn renorm_drift(&self) -> T {
        self.renorm_drift
    }

    /// Adds a spatial constant to `S`; `ρ`, `v` and `Q` are untouched.
    pub fn shift_phase(&self, c: T) -> Self {
        let mut out = self.clone();
        out.s_periodic.iter_mut().for_each(|s| *s += c);
        out
    }

    /// `Ψ = √ρ e^{iS/ħ}`.
    pub fn recompose(&self) -> WaveField<T> {
        let s = self.s();
        let values = self
            .amplitude
            .iter()
            .zip(s.values())
            .map(|(&r, &s)| Complex::from_polar(r, s / self.constants.hbar))
            .collect();
        WaveField::new(*self.grid(), values).expect("same grid")
    }
}

fn ramp<T: Real>(grid: &GridSpec<T>, winding: &[T; 2], idx: usize) -> T {
    let (ix, iy) = grid.unflatten(idx);
    let mut r = winding[0] * (grid.coord(0, ix) - grid.origin(0));
    if grid.dims() == 2 {
        r += winding[1] * (grid.coord(1, iy) - grid.origin(1));
    }
    r
}

/// Polar decomposition.
///
/// The phase is unwrapped by accumulating nearest-branch phase differences: along the line
/// in 1D, and along the first row and then every column in 2D (valid for vortex-free
/// fields). `v` is computed as `(ħ/m) Im(Ψ* ∇Ψ) / max(ρ, ε_ρ)`, which does not depend on the
/// unwrapping.
pub fn decompose<T: Real>(
    psi: &WaveField<T>,
    constants: &Constants<T>,
) -> Result<MadelungState<T>> {
    psi.ensure_finite()?;
    let grid = *psi.grid();
    let spectral = Spectral::new(&grid);
    let (nx, ny) = (grid.points(0), grid.points(1));
    let arg: Vec<T> = psi.values().iter().map(|z| z.arg()).collect();
    let hbar = constants.hbar;

    let mut theta = vec![T::zero(); grid.len()];
    theta[0] = arg[0];
    let mut winding = [T::zero(); 2];
    let mut total = T::zero();
    for ix in 1..=nx {
        let cur = (ix % nx) * ny;
        let prev = (ix - 1) * ny;
        let d = wrap_phase(arg[cur] - arg[prev]);
        total += d;
        if ix < nx {
            theta[cur] = theta[prev] + d;
        }
    }
    winding[0] = hbar * total / grid.extent(0);
    if grid.dims() == 2 {
        let mut total = T::zero();
        for iy in 1..=ny {
            total += wrap_phase(arg[iy % ny] - arg[iy - 1]);
        }
        winding[1] = hbar * total / grid.extent(1);
        for ix in 0..nx {
            for iy in 1..ny {
                let i = ix * ny + iy;
                theta[i] = theta[i - 1] + wrap_phase(arg[i] - arg[i - 1]);
            }
        }
    }

    let s_periodic = theta
        .iter()
        .enumerate()
        .map(|(i, &t)| hbar * t - ramp(&grid, &winding, i))
        .collect();
    let amplitude = psi.values().iter().map(|z| z.norm()).collect();
    let mut state =
        MadelungState::from_parts(grid, amplitude, s_periodic, winding, *constants, &spectral)?;
    state.v = guidance_field(psi, constants, &spectral, state.floor)?;
    Ok(state)
}

/// `(ħ/m) Im(Ψ* ∇Ψ) / max(|Ψ|², floor)`.
pub fn guidance_field<T: Real>(
    psi: &WaveField<T>,
    constants: &Constants<T>,
    spectral: &Spectral<T>,
    floor: T,
) -> Result<VectorField<T>> {
    let hm = constants.hbar_over_mass();
    let comps = (0..psi.grid().dims())
        .map(|a| {
            let d = spectral.derivative_complex(psi.values(), a);
            psi.values()
                .iter()
                .zip(d)
                .map(|(z, dz)| hm * (z.conj() * dz).im / Float::max(z.norm_sqr(), floor))
                .collect()
        })
        .collect();
    VectorField::new(*psi.grid(), comps)
}

/// `∇²√ρ / √ρ` with the denominator floored at `√ε_ρ`.
pub fn sqrt_curvature<T: Real>(rho: &ScalarField<T>) -> Result<ScalarField<T>> {
    let spectral = Spectral::new(rho.grid());
    let (ratio, _) = curvature_parts(&spectral, rho, false)?;
    ScalarField::new(*rho.grid(), ratio)
}

/// Gradient of [`sqrt_curvature`], by the product rule
/// `∇(L/R) = ∇L/R - L ∇R/R²` so that no floored quantity is differentiated.
pub fn sqrt_curvature_gradient<T: Real>(rho: &ScalarField<T>) -> Result<VectorField<T>> {
    let spectral = Spectral::new(rho.grid());
    let (_, grad) = curvature_parts(&spectral, rho, true)?;
    VectorField::new(*rho.grid(), grad)
}

fn curvature_parts<T: Real>(
    spectral: &Spectral<T>,
    rho: &ScalarField<T>,
    with_gradient: bool,
) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    rho.ensure_finite()?;
    let r: Vec<T> = rho
        .values()
        .iter()
        .map(|&p| Float::sqrt(Float::max(p, T::zero())))
        .collect();
    let r_floor = Float::sqrt(density_floor(rho.values()));
    let lap = spectral.laplacian_values(&r);
    let ratio = r
        .iter()
        .zip(&lap)
        .map(|(&r, &l)| l / Float::max(r, r_floor))
        .collect();
    if !with_gradient {
        return Ok((ratio, Vec::new()));
    }
    let grad = (0..rho.grid().dims())
        .map(|a| {
            let dl = spectral.derivative(&lap, a);
            let dr = spectral.derivative(&r, a);
            (0..r.len())
                .map(|i| {
                    if r[i] > r_floor {
                        dl[i] / r[i] - lap[i] * dr[i] / (r[i] * r[i])
                    } else {
                        dl[i] / r_floor
                    }
                })
                .collect()
        })
        .collect();
    Ok((ratio, grad))
}

/// `Q = -(ħ²/2m) ∇²√ρ/√ρ`, floored where `ρ < ε_ρ`.
pub fn quantum_potential<T: Real>(
    rho: &ScalarField<T>,
    constants: &Constants<T>,
) -> Result<ScalarField<T>> {
    let c = -constants.hbar * constants.hbar / (T::lit(2.0) * constants.mass);
    Ok(sqrt_curvature(rho)?.scale(c))
}

/// `∇Q`.
pub fn quantum_potential_gradient<T: Real>(
    rho: &ScalarField<T>,
    constants: &Constants<T>,
) -> Result<VectorField<T>> {
    let c = -constants.hbar * constants.hbar / (T::lit(2.0) * constants.mass);
    Ok(sqrt_curvature_gradient(rho)?.scale(c))
}

/// `∂ρ/∂t` and `∂v/∂t` at a snapshot.
#[derive(Debug, Clone)]
pub struct TimeDerivatives<T> {
    pub rho: ScalarField<T>,
    pub v: VectorField<T>,
}

impl<T: Real> TimeDerivatives<T> {
    /// Centred differences of the states at `t - dt` and `t + dt`.
    pub fn centered(before: &MadelungState<T>, after: &MadelungState<T>, dt: T) -> Result<Self> {
        let two_dt = T::lit(2.0) * dt;
        Ok(Self {
            rho: after.rho.zip_map(&before.rho, |a, b| (a - b) / two_dt)?,
            v: after.v.zip_map(&before.v, |a, b| (a - b) / two_dt)?,
        })
    }
}

/// L2 norms of the continuity and momentum residuals over the resolved region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MadelungResidual<T> {
    pub continuity: T,
    pub momentum: T,
}

/// Residuals `∂ρ/∂t + ∇·(ρv)` and `∂v/∂t + (v·∇)v + ∇(U + Q)/m`.
///
/// `(v·∇)v` is evaluated from `Ψ` as `v_b ∂_b v_a` with
/// `∂_b v_a = (ħ/m) Im(∂_a∂_bΨ/Ψ - ∂_aΨ ∂_bΨ/Ψ²)`, and `∇U` by centred differences.
pub fn madelung_residual<T: Real>(
    state: &MadelungState<T>,
    potential: &ScalarField<T>,
    d_dt: &TimeDerivatives<T>,
) -> Result<MadelungResidual<T>> {
    let grid = *state.grid();
    grid.ensure_same(potential.grid())?;
    grid.ensure_same(d_dt.rho.grid())?;
    let spectral = Spectral::new(&grid);
    let c = state.constants;
    let dims = grid.dims();
    let mask = state.resolved_mask();
    let dv = grid.cell_volume();

    let flux = state.v.mul_scalar_field(&state.rho)?;
    let div = spectral.divergence(&flux)?;
    let cont: Vec<T> = d_dt
        .rho
        .values()
        .iter()
        .zip(div.values())
        .map(|(&a, &b)| a + b)
        .collect();

    let psi = state.recompose();
    let first: Vec<Vec<Complex<T>>> = (0..dims)
        .map(|a| spectral.derivative_complex(psi.values(), a))
        .collect();
    let hm = c.hbar_over_mass();
    let grad_q = quantum_potential_gradient(&state.rho, &c)?;
    let mut mom_sq = T::zero();
    for a in 0..dims {
        let grad_u = fd_derivative_values(&grid, potential.values(), a)?;
        let mut conv = vec![T::zero(); grid.len()];
        for (b, dpsi_b) in first.iter().enumerate() {
            let second = spectral.derivative_complex(&first[a], b);
            for i in 0..grid.len() {
                if !mask[i] {
                    continue;
                }
                let z = psi.values()[i];
                let dvab = hm * (second[i] / z - first[a][i] * dpsi_b[i] / (z * z)).im;
                conv[i] += state.v.component(b)[i] * dvab;
            }
        }
        let r: Vec<T> = (0..grid.len())
            .map(|i| {
                d_dt.v.component(a)[i] + conv[i] + (grad_u[i] + grad_q.component(a)[i]) / c.mass
            })
            .collect();
        let n = l2(&r, dv, Some(&mask));
        mom_sq += n * n;
    }
    Ok(MadelungResidual {
        continuity: l2(&cont, dv, Some(&mask)),
        momentum: Float::sqrt(mom_sq),
    })
}

/// RK4 integrator of the `(R, S)` system
///
/// ```text
/// ∂R/∂t = -(∇R·∇S + ½ R ∇²S)/m
/// ∂S/∂t = -(|∇S|²/2m + U + Q)
/// ```
///
/// Both right-hand sides are evaluated through `Ψ = R e^{iS/ħ}` as
/// `∂R/∂t = Im(e^{-iS/ħ} ĤΨ)/ħ` and `∂S/∂t = -Re(e^{-iS/ħ} ĤΨ)/R` with a spectral kinetic
/// term; differentiating `R` and `S` separately and recombining them pointwise is linearly
/// unstable on a grid. Where `ρ < ε_ρ` the phase equation is relaxed towards the
/// density-weighted mean `-⟨Ĥ⟩` with weight `ε_ρ/(ρ + ε_ρ)`, so unresolved tails neither
/// divide by zero nor develop Hamilton-Jacobi singularities.
pub struct MadelungStepper<T: Real> {
    spectral: Spectral<T>,
    potential: Vec<T>,
    kinetic: Vec<T>,
    dt: T,
}

impl<T: Real> MadelungStepper<T> {
    pub fn new(potential: &ScalarField<T>, dt: T, constants: &Constants<T>) -> Result<Self> {
        potential.ensure_finite()?;
        let grid = *potential.grid();
        let h_min = (0..grid.dims())
            .map(|a| grid.spacing(a))
            .fold(T::infinity(), Float::min);
        let limit = T::lit(CFL) * h_min * h_min * constants.mass
            / (constants.hbar * T::from_usize_lossy(grid.dims()));
        if !(dt > T::zero() && dt <= limit) {
            return Err(Error::Stability {
                dt: dt.as_f64(),
                limit: limit.as_f64(),
                scheme: "madelung rk4",
            });
        }
        let spectral = Spectral::new(&grid);
        let half_over_m = constants.hbar * constants.hbar / (T::lit(2.0) * constants.mass);
        let kinetic = (0..grid.len())
            .map(|idx| {
                let (ix, iy) = grid.unflatten(idx);
                let mut k2 = spectral.k_squared(0)[ix];
                if grid.dims() == 2 {
                    k2 += spectral.k_squared(1)[iy];
                }
                half_over_m * k2
            })
            .collect();
        Ok(Self {
            spectral,
            potential: potential.values().to_vec(),
            kinetic,
            dt,
        })
    }

    fn rhs(&self, r: &[T], s_per: &[T], winding: &[T; 2], c: &Constants<T>) -> (Vec<T>, Vec<T>) {
        let grid = self.spectral.grid();
        let n = r.len();
        let hbar = c.hbar;
        let phase: Vec<Complex<T>> = (0..n)
            .map(|i| Complex::from_polar(T::one(), (s_per[i] + ramp(grid, winding, i)) / hbar))
            .collect();
        let mut hpsi: Vec<Complex<T>> = (0..n).map(|i| phase[i] * r[i]).collect();
        self.spectral.fft(&mut hpsi, false);
        hpsi.iter_mut()
            .zip(&self.kinetic)
            .for_each(|(z, &k)| *z = *z * k);
        self.spectral.fft(&mut hpsi, true);
        let z: Vec<Complex<T>> = (0..n)
            .map(|i| phase[i].conj() * (hpsi[i] + phase[i] * (r[i] * self.potential[i])))
            .collect();
        let rho: Vec<T> = r.iter().map(|&x| x * x).collect();
        let eps = density_floor(&rho);
        let total: T = rho.iter().copied().sum();
        let mean = -(0..n).map(|i| r[i] * z[i].re).sum::<T>() / total;
        let dr = z.iter().map(|z| z.im / hbar).collect();
        let ds = (0..n)
            .map(|i| (-z[i].re * r[i] + eps * mean) / (rho[i] + eps))
            .collect();
        (dr, ds)
    }

    /// One RK4 step followed by renormalization of `ρ`.
    pub fn step(&self, state: &MadelungState<T>) -> Result<MadelungState<T>> {
        state.grid().ensure_same(self.spectral.grid())?;
        let c = state.constants;
        let dt = self.dt;
        let half = T::lit(0.5);
        let r0 = &state.amplitude;
        let s0 = &state.s_periodic;
        let w = &state.winding;
        let axpy = |x: &[T], k: &[T], a: T| -> Vec<T> {
            x.iter().zip(k).map(|(&x, &k)| x + a * k).collect()
        };

        let (kr1, ks1) = self.rhs(r0, s0, w, &c);
        let (kr2, ks2) = self.rhs(
            &axpy(r0, &kr1, half * dt),
            &axpy(s0, &ks1, half * dt),
            w,
            &c,
        );
        let (kr3, ks3) = self.rhs(
            &axpy(r0, &kr2, half * dt),
            &axpy(s0, &ks2, half * dt),
            w,
            &c,
        );
        let (kr4, ks4) = self.rhs(&axpy(r0, &kr3, dt), &axpy(s0, &ks3, dt), w, &c);
        let sixth = dt / T::lit(6.0);
        let two = T::lit(2.0);
        let combine = |x: &[T], a: &[T], b: &[T], cc: &[T], d: &[T]| -> Vec<T> {
            (0..x.len())
                .map(|i| x[i] + sixth * (a[i] + two * b[i] + two * cc[i] + d[i]))
                .collect()
        };
        let mut r = combine(r0, &kr1, &kr2, &kr3, &kr4);
        let s = combine(s0, &ks1, &ks2, &ks3, &ks4);

        let grid = *state.grid();
        let mass = r.iter().map(|&x| x * x).sum::<T>() * grid.cell_volume();
        if !(mass.is_finite() && mass > T::zero()) {
            return Err(Error::NonFinite {
                what: "madelung density",
                index: 0,
            });
        }
        let target = state.rho.integrate()?;
        let scale = Float::sqrt(target / mass);
        r.iter_mut().for_each(|x| *x *= scale);
        let mut next = MadelungState::from_parts(grid, r, s, *w, c, &self.spectral)?;
        next.renorm_drift = Float::max(state.renorm_drift, Float::abs(mass - target));
        Ok(next)
    }
}

/// One RK4 step of the Madelung system; see [`MadelungStepper`].
pub fn madelung_step<T: Real>(
    state: &MadelungState<T>,
    potential: &ScalarField<T>,
    dt: T,
) -> Result<MadelungState<T>> {
    MadelungStepper::new(potential, dt, &state.constants)?.step(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{split_step_evolve, Potential, PropagatorState};

    fn gaussian_psi(g: GridSpec<f64>, x0: f64, s: f64, k: f64) -> WaveField<f64> {
        WaveField::from_fn(g, |x, _| {
            let d = x - x0;
            Complex::from_polar((-d * d / (4.0 * s * s)).exp(), k * x)
        })
        .normalized()
        .unwrap()
    }

    #[test]
    fn plane_wave_velocity_and_uniform_density() {
        let l = 10.0;
        let g = GridSpec::line(0.0, l, 64).unwrap();
        let k = 2.0 * std::f64::consts::PI * 3.0 / l;
        let psi = WaveField::from_fn(g, |x, _| Complex::from_polar(1.0, k * x))
            .normalized()
            .unwrap();
        let st = decompose(&psi, &Constants::default()).unwrap();
        for (&r, &v) in st.rho().values().iter().zip(st.v().component(0)) {
            assert!((r - 1.0 / l).abs() < 1e-14);
            assert!((v - k).abs() < 1e-12);
        }
        assert!((st.winding()[0] - k).abs() < 1e-12);
        assert!(st.recompose().l2_distance(&psi).unwrap() < 1e-12);
    }

    #[test]
    fn real_gaussian_has_no_phase() {
        let g = GridSpec::centered_line(10.0, 128).unwrap();
        let st = decompose(&gaussian_psi(g, 0.0, 1.0, 0.0), &Constants::default()).unwrap();
        assert!(st.s().values().iter().all(|&s| s == 0.0));
        let mask = st.resolved_mask();
        assert!(st.v().l2_norm_masked(Some(&mask)) < 1e-10);
    }

    #[test]
    fn recompose_round_trip_2d() {
        let g = GridSpec::centered_plane(8.0, 48).unwrap();
        let kx = 2.0 * std::f64::consts::PI / 16.0;
        let psi = WaveField::from_fn(g, |x, y| {
            let amp = (-(x * x + y * y) / 4.0).exp();
            Complex::from_polar(amp, kx * x + 0.3 * (x - 0.5 * y).sin())
        })
        .normalized()
        .unwrap();
        let st = decompose(&psi, &Constants::default()).unwrap();
        assert!(st.recompose().l2_distance_up_to_phase(&psi).unwrap() < 1e-8);
        assert!((st.winding()[0] - kx).abs() < 1e-12);
        assert!(st.winding()[1].abs() < 1e-12);
    }

    #[test]
    fn coherent_state_velocity_profile() {
        // displaced ground state of the unit oscillator: v(x, t) = -x0 sin t uniformly
        let g = GridSpec::centered_line(12.0, 256).unwrap();
        let c = Constants::default();
        let x0 = 2.0;
        let psi = gaussian_psi(g, x0, std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let dt = 1e-3;
        let steps = 500;
        let st = PropagatorState::new(&psi, dt, c).unwrap();
        let out = split_step_evolve(st, &Potential::Harmonic { omega: 1.0 }, steps).unwrap();
        let t = dt * steps as f64;
        let m = decompose(&out.psi, &c).unwrap();
        let mask = m.resolved_mask();
        let exact = VectorField::new(g, vec![vec![-x0 * t.sin(); g.len()]]).unwrap();
        let err = m.v().l2_distance_masked(&exact, Some(&mask)).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn gaussian_quantum_potential() {
        let g = GridSpec::centered_line(16.0, 512).unwrap();
        let s = 1.3f64;
        let rho = ScalarField::from_fn(g, |x, _| (-x * x / (2.0 * s * s)).exp());
        let q = quantum_potential(&rho, &Constants::default()).unwrap();
        let mask = resolved_mask(&rho);
        let s2 = s * s;
        for (i, (&qv, &keep)) in q.values().iter().zip(&mask).enumerate() {
            if keep {
                let x = g.coord(0, i);
                let exact = -0.5 * (x * x / (4.0 * s2 * s2) - 1.0 / (2.0 * s2));
                assert!(
                    (qv - exact).abs() < 1e-8 * (1.0 + exact.abs()),
                    "{x}: {qv} vs {exact}"
                );
            }
        }
        let centre = q.values()[256];
        assert!((centre - 1.0 / (4.0 * s2)).abs() < 1e-10);
    }

    #[test]
    fn ground_state_balance() {
        let g = GridSpec::centered_line(12.0, 512).unwrap();
        let c = Constants::default();
        let rho = ScalarField::from_fn(g, |x, _| (-x * x).exp())
            .normalized()
            .unwrap();
        let u = Potential::Harmonic { omega: 1.0 }.realize(&g, &c).unwrap();
        let q = quantum_potential(&rho, &c).unwrap();
        let floor = density_floor(rho.values());
        let sums: Vec<f64> = (0..g.len())
            .filter(|&i| rho.values()[i] > floor)
            .map(|i| q.values()[i] + u.values()[i])
            .collect();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        let var = sums.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / sums.len() as f64;
        assert!((mean - 0.5).abs() < 1e-9);
        assert!(var <= 1e-8, "{var}");
    }

    #[test]
    fn quantum_potential_scaling_laws() {
        let g = GridSpec::centered_line(8.0, 128).unwrap();
        let rho = ScalarField::from_fn(g, |x, _| (-x * x / 2.0).exp() * (1.2 + 0.5 * x.sin()));
        let c1 = Constants::new(1.0, 1.0).unwrap();
        let q1 = quantum_potential(&rho, &c1).unwrap();
        let q2 = quantum_potential(&rho, &Constants::new(2.0, 1.0).unwrap()).unwrap();
        let q3 = quantum_potential(&rho, &Constants::new(1.0, 4.0).unwrap()).unwrap();
        for i in 0..g.len() {
            assert_eq!(q2.values()[i], 4.0 * q1.values()[i]);
            assert!((q3.values()[i] - q1.values()[i] / 4.0).abs() <= 1e-15 * q1.values()[i].abs());
        }
        // a power-of-two factor commutes with every rounding step
        assert_eq!(quantum_potential(&rho.scale(4.0), &c1).unwrap(), q1);
        // otherwise rounding noise in ∇²√ρ is amplified by 1/√ρ in the tails
        let qc = quantum_potential(&rho.scale(37.5), &c1).unwrap();
        let mask = resolved_mask(&rho);
        let peak = rho.max();
        for i in 0..g.len() {
            let (a, b) = (qc.values()[i], q1.values()[i]);
            let e = (a - b).abs() / (1.0 + b.abs());
            if rho.values()[i] > 1e-4 * peak {
                assert!(e <= 1e-12, "{i}: {e}");
            } else if mask[i] {
                assert!(e <= 1e-9, "{i}: {e}");
            }
        }
    }

    #[test]
    fn gauge_shift_leaves_flow_unchanged() {
        let g = GridSpec::centered_line(10.0, 128).unwrap();
        let c = Constants::default();
        let st = decompose(&gaussian_psi(g, 0.5, 1.0, 1.5), &c).unwrap();
        let shifted = st.shift_phase(0.75);
        assert_eq!(st.rho(), shifted.rho());
        assert_eq!(st.v(), shifted.v());
        assert_eq!(
            quantum_potential(st.rho(), &c).unwrap(),
            quantum_potential(shifted.rho(), &c).unwrap()
        );
        let a = st.recompose();
        let b = shifted.recompose();
        let phase = a.inner(&b).unwrap();
        assert!((phase.arg() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn curvature_gradient_matches_spectral_derivative_of_ratio() {
        // density bounded away from zero, so no floor is active and both routes are spectral
        let l = 2.0 * std::f64::consts::PI;
        let g = GridSpec::line(0.0, l, 128).unwrap();
        let rho = ScalarField::from_fn(g, |x, _| (x.cos() + 0.5 * (2.0 * x).sin()).exp());
        let ratio = sqrt_curvature(&rho).unwrap();
        let direct = crate::spectral::gradient(&ratio).unwrap();
        let prod = sqrt_curvature_gradient(&rho).unwrap();
        let err = direct.l2_distance_masked(&prod, None).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn stationary_state_residuals_vanish() {
        let g = GridSpec::centered_line(12.0, 256).unwrap();
        let c = Constants::default();
        let psi = gaussian_psi(g, 0.0, std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let u = Potential::Harmonic { omega: 1.0 }.realize(&g, &c).unwrap();
        let dt = 1e-3;
        let before = decompose(&psi.scale(Complex::from_polar(1.0, 0.5 * dt)), &c).unwrap();
        let after = decompose(&psi.scale(Complex::from_polar(1.0, -0.5 * dt)), &c).unwrap();
        let now = decompose(&psi, &c).unwrap();
        let d = TimeDerivatives::centered(&before, &after, dt).unwrap();
        let r = madelung_residual(&now, &u, &d).unwrap();
        assert!(r.continuity <= 1e-6 && r.momentum <= 1e-6, "{r:?}");
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let g = GridSpec::centered_line(10.0, 128).unwrap();
        let c = Constants::default();
        let st = decompose(&gaussian_psi(g, 0.0, 1.0, 0.0), &c).unwrap();
        let u = ScalarField::zeros(g);
        let h = g.spacing(0);
        assert!(matches!(
            madelung_step(&st, &u, 0.6 * h * h),
            Err(Error::Stability { .. })
        ));
        assert!(madelung_step(&st, &u, 0.4 * h * h).is_ok());
    }

    #[test]
    fn ground_state_is_a_fixed_point() {
        let g = GridSpec::centered_line(10.0, 128).unwrap();
        let c = Constants::default();
        let psi = gaussian_psi(g, 0.0, std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let u = Potential::Harmonic { omega: 1.0 }.realize(&g, &c).unwrap();
        let dt = 2e-3;
        let stepper = MadelungStepper::new(&u, dt, &c).unwrap();
        let mut st = decompose(&psi, &c).unwrap();
        let rho0 = st.rho().clone();
        let steps = (2.0 * std::f64::consts::PI / dt).round() as usize;
        for _ in 0..steps {
            st = stepper.step(&st).unwrap();
        }
        let drift = st.rho().l2_distance(&rho0).unwrap();
        assert!(drift <= 1e-6, "{drift}");
    }

    #[test]
    fn free_gaussian_tracks_oracle() {
        let g = GridSpec::centered_line(12.0, 256).unwrap();
        let c = Constants::default();
        let psi = gaussian_psi(g, 0.0, 1.0, 0.0);
        let dt = 1e-4;
        let steps = 5000;
        let u = ScalarField::zeros(g);
        let stepper = MadelungStepper::new(&u, dt, &c).unwrap();
        let mut st = decompose(&psi, &c).unwrap();
        for _ in 0..steps {
            st = stepper.step(&st).unwrap();
        }
        let oracle = split_step_evolve(
            PropagatorState::new(&psi, 1e-3, c).unwrap(),
            &Potential::Free,
            500,
        )
        .unwrap();
        let err = st.rho().l2_distance(&oracle.psi.density()).unwrap();
        assert!(err <= 1e-3, "{err}");
        assert!(st.renorm_drift() < 1e-6);
    }
}

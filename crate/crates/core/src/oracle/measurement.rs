//! Energy measurement by a pointer coupled through `H_I = λ H_x p_y`.
//!
//! With the pointer's own kinetic term dropped, `H_x` and `p_y` commute, so each energy
//! eigencomponent `φ_k` simply translates the pointer by `λ ε_k T`:
//!
//! ```text
//! Ψ(x, y, T) = Σ_k c_k e^{-i ε_k T/ħ} φ_k(x) Φ(y - λ ε_k T)
//! ```

use num_complex::Complex;
use num_traits::Float;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::{ScalarField, WaveField};
use crate::grid::GridSpec;
use crate::oracle::eigen::Eigenpair;
use crate::scalar::Real;
use crate::spectral::{fd_second_derivative_symbol, Spectral};

/// Pointer widths kept between a shifted packet and the periodic seam.
const SEAM_MARGIN: f64 = 6.0;

/// Gaussian pointer wave function `Φ(y)` whose density has standard deviation `width`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPointer<T> {
    pub grid: GridSpec<T>,
    pub center: T,
    pub width: T,
}

impl<T: Real> GaussianPointer<T> {
    pub fn new(grid: GridSpec<T>, center: T, width: T) -> Result<Self> {
        if grid.dims() != 1 {
            return Err(Error::Config("pointer grid must be 1D".into()));
        }
        if !(width > T::zero()) {
            return Err(Error::Config("pointer width must be positive".into()));
        }
        let p = Self {
            grid,
            center,
            width,
        };
        p.check_center(center, T::zero())?;
        Ok(p)
    }

    /// Normalized samples of `Φ`.
    pub fn wave(&self) -> Result<WaveField<T>> {
        let four_w2 = T::lit(4.0) * self.width * self.width;
        WaveField::from_fn(self.grid, |y, _| {
            let d = y - self.center;
            Complex::new(Float::exp(-d * d / four_w2), T::zero())
        })
        .normalized()
    }

    fn check_center(&self, center: T, shift: T) -> Result<()> {
        let lo = self.grid.origin(0);
        let hi = lo + self.grid.extent(0);
        let margin = T::lit(SEAM_MARGIN) * self.width;
        if center - margin < lo || center + margin > hi {
            let required = Float::abs(shift) + T::lit(2.0 * SEAM_MARGIN) * self.width;
            return Err(Error::PointerOutOfDomain {
                shift: shift.as_f64(),
                required: required.as_f64(),
            });
        }
        Ok(())
    }
}

/// Closed-form post-measurement state on the product grid `(x, y)`.
///
/// The translation `Φ(y) → Φ(y - λ ε_k T)` is applied as the Fourier multiplier
/// `exp(-i λ ε_k T k_y)`, i.e. the exact action of `exp(-i λ ε_k T p_y / ħ)`.
pub fn pointer_measurement_evolve<T: Real>(
    coeffs: &[Complex<T>],
    states: &[Eigenpair<T>],
    pointer: &GaussianPointer<T>,
    coupling: T,
    duration: T,
    constants: &Constants<T>,
) -> Result<WaveField<T>> {
    if coeffs.len() > states.len() {
        return Err(Error::Config(format!(
            "{} coefficients but only {} eigenpairs",
            coeffs.len(),
            states.len()
        )));
    }
    if coeffs.is_empty() {
        return Err(Error::Config("no coefficients given".into()));
    }
    let xgrid = *states[0].state.grid();
    if xgrid.dims() != 1 {
        return Err(Error::Config("eigenstates must live on a 1D grid".into()));
    }
    let ygrid = pointer.grid;
    let grid = GridSpec::product(&xgrid, &ygrid)?;
    let phi0 = pointer.wave()?;
    let yspec = Spectral::new(&ygrid);
    let ky = yspec.k_odd(0).to_vec();
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; grid.len()];
    let ny = ygrid.points(0);

    for (c, pair) in coeffs.iter().zip(states) {
        pair.state.grid().ensure_same(&xgrid)?;
        if c.norm_sqr() == T::zero() {
            continue;
        }
        let shift = coupling * pair.energy * duration;
        pointer.check_center(pointer.center + shift, shift)?;
        let mut shifted = phi0.values().to_vec();
        yspec.fft(&mut shifted, false);
        for (z, &k) in shifted.iter_mut().zip(&ky) {
            *z = *z * Complex::from_polar(T::one(), -k * shift);
        }
        yspec.fft(&mut shifted, true);
        let amp = *c * Complex::from_polar(T::one(), -pair.energy * duration / constants.hbar);
        for (ix, phi_x) in pair.state.values().iter().enumerate() {
            let a = amp * *phi_x;
            let row = &mut out[ix * ny..(ix + 1) * ny];
            for (o, s) in row.iter_mut().zip(&shifted) {
                *o = *o + a * *s;
            }
        }
    }
    WaveField::new(grid, out)
}

/// Pointer marginal `∫ |Ψ(x, y)|² dx` on the `y` axis.
pub fn pointer_marginal<T: Real>(psi: &WaveField<T>) -> Result<ScalarField<T>> {
    let grid = psi.grid();
    if grid.dims() != 2 {
        return Err(Error::Config(
            "pointer marginal needs a 2D (x, y) field".into(),
        ));
    }
    let ygrid = grid.axis_grid(1)?;
    let (nx, ny) = (grid.points(0), grid.points(1));
    let hx = grid.spacing(0);
    let mut m = vec![T::zero(); ny];
    for ix in 0..nx {
        for (iy, slot) in m.iter_mut().enumerate() {
            *slot += psi.values()[ix * ny + iy].norm_sqr() * hx;
        }
    }
    ScalarField::new(ygrid, m)
}

/// Mean of a 1D density field.
pub fn density_mean<T: Real>(density: &ScalarField<T>) -> Result<T> {
    let weighted =
        ScalarField::from_fn(*density.grid(), |y, _| y).zip_map(density, |y, p| y * p)?;
    Ok(weighted.integrate()? / density.integrate()?)
}

/// Mass of a 1D density on `[lo, hi)`.
pub fn density_mass_between<T: Real>(density: &ScalarField<T>, lo: T, hi: T) -> T {
    let g = density.grid();
    let mut s = T::zero();
    for (i, &p) in density.values().iter().enumerate() {
        let y = g.coord(0, i);
        if y >= lo && y < hi {
            s += p;
        }
    }
    s * g.spacing(0)
}

/// Brute-force evolution under `H = (1 + λ p_y) H_x` with Strang splitting, used to
/// cross-check [`pointer_measurement_evolve`].
///
/// `H_x` uses the finite-difference kinetic symbol so it matches the eigenpairs from
/// [`stationary_states`](crate::oracle::stationary_states). The state is held in the mixed
/// `(x, k_y)` representation where `p_y` is diagonal.
pub fn pointer_measurement_stepped<T: Real>(
    initial: &WaveField<T>,
    potential_x: &ScalarField<T>,
    coupling: T,
    duration: T,
    steps: usize,
    constants: &Constants<T>,
) -> Result<WaveField<T>> {
    let grid = *initial.grid();
    if grid.dims() != 2 {
        return Err(Error::Config(
            "stepped measurement needs a 2D (x, y) field".into(),
        ));
    }
    grid.axis_grid(0)?.ensure_same(potential_x.grid())?;
    if steps == 0 {
        return Err(Error::Config("steps must be positive".into()));
    }
    let dt = duration / T::from_usize_lossy(steps);
    let spectral = Spectral::new(&grid);
    let (nx, ny) = (grid.points(0), grid.points(1));
    let hbar = constants.hbar;
    let ky = spectral.k_odd(1).to_vec();
    let g: Vec<T> = ky.iter().map(|&k| T::one() + coupling * hbar * k).collect();
    let kin_sym: Vec<T> = fd_second_derivative_symbol(nx, grid.extent(0))
        .into_iter()
        .map(|s| -s * hbar * hbar / (T::lit(2.0) * constants.mass))
        .collect();
    let half = T::lit(0.5);
    let mut kick = Vec::with_capacity(grid.len());
    let mut drift = Vec::with_capacity(grid.len());
    for ix in 0..nx {
        let u = potential_x.values()[ix];
        for gy in g.iter().take(ny) {
            kick.push(Complex::from_polar(T::one(), -*gy * u * dt * half / hbar));
            drift.push(Complex::from_polar(
                T::one(),
                -*gy * kin_sym[ix] * dt / hbar,
            ));
        }
    }
    let mut psi = initial.values().to_vec();
    let norm0 = initial.norm_sqr();
    spectral.fft_axis(&mut psi, 1, false);
    for _ in 0..steps {
        psi.iter_mut().zip(&kick).for_each(|(z, k)| *z = *z * *k);
        spectral.fft_axis(&mut psi, 0, false);
        psi.iter_mut().zip(&drift).for_each(|(z, k)| *z = *z * *k);
        spectral.fft_axis(&mut psi, 0, true);
        psi.iter_mut().zip(&kick).for_each(|(z, k)| *z = *z * *k);
    }
    spectral.fft_axis(&mut psi, 1, true);
    let out = WaveField::new(grid, psi)?;
    let drift_norm = Float::abs(out.norm_sqr() - norm0);
    if drift_norm > crate::oracle::propagator::unitarity_limit() {
        return Err(Error::Unitarity {
            step: steps,
            drift: drift_norm.as_f64(),
        });
    }
    Ok(out)
}

/// Product state `[Σ c_k φ_k(x)] Φ(y)` on the `(x, y)` grid.
pub fn product_initial_state<T: Real>(
    coeffs: &[Complex<T>],
    states: &[Eigenpair<T>],
    pointer: &GaussianPointer<T>,
) -> Result<WaveField<T>> {
    pointer_measurement_evolve(
        coeffs,
        states,
        pointer,
        T::zero(),
        T::zero(),
        &Constants::default(),
    )
}

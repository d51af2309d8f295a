//! Fourier-space calculus on periodic grids: gradient, Laplacian, divergence.
//!
//! First derivatives zero the Nyquist mode (its derivative is not real-representable);
//! second derivatives keep it with `k² = (π/h)²`. Both are exact for band-limited fields
//! below the Nyquist frequency.

use std::sync::Arc;

use num_complex::Complex;
use num_traits::Float;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::GridSpec;
use crate::scalar::Real;

/// Angular wavenumbers of an `n`-point periodic axis with spacing `h`, in FFT order.
/// The Nyquist entry (even `n`) is `-π/h`.
pub fn wavenumbers<T: Real>(n: usize, extent: T) -> Vec<T> {
    let dk = T::TAU() / extent;
    (0..n)
        .map(|j| {
            let m = if j <= (n - 1) / 2 {
                j as f64
            } else {
                j as f64 - n as f64
            };
            T::lit(m) * dk
        })
        .collect()
}

struct AxisPlan<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    /// Wavenumbers with the Nyquist mode zeroed, for odd derivatives.
    k_odd: Vec<T>,
    /// Squared wavenumbers, Nyquist retained.
    k_sq: Vec<T>,
}

/// FFT plans and wavenumber tables for one grid. Cheap to share by reference.
pub struct Spectral<T: Real> {
    grid: GridSpec<T>,
    axes: Vec<AxisPlan<T>>,
}

impl<T: Real> std::fmt::Debug for Spectral<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl<T: Real> Spectral<T> {
    pub fn new(grid: &GridSpec<T>) -> Self {
        let mut planner = FftPlanner::<T>::new();
        let axes = (0..grid.dims())
            .map(|a| {
                let n = grid.points(a);
                let k = wavenumbers(n, grid.extent(a));
                let k_sq = k.iter().map(|&x| x * x).collect();
                let mut k_odd = k;
                if n % 2 == 0 {
                    k_odd[n / 2] = T::zero();
                }
                AxisPlan {
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                    k_odd,
                    k_sq,
                }
            })
            .collect();
        Self { grid: *grid, axes }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    /// Squared wavenumbers along `axis` in FFT order.
    pub fn k_squared(&self, axis: usize) -> &[T] {
        &self.axes[axis].k_sq
    }

    /// Wavenumbers along `axis` in FFT order, Nyquist zeroed.
    pub fn k_odd(&self, axis: usize) -> &[T] {
        &self.axes[axis].k_odd
    }

    /// In-place transform along one axis. The inverse is normalized.
    pub fn fft_axis(&self, data: &mut [Complex<T>], axis: usize, inverse: bool) {
        let plan = &self.axes[axis];
        let fft = if inverse {
            &plan.inverse
        } else {
            &plan.forward
        };
        let n = self.grid.points(axis);
        if axis + 1 == self.grid.dims() {
            // contiguous rows
            fft.process(data);
        } else {
            let ny = self.grid.points(1);
            let mut col = vec![Complex::new(T::zero(), T::zero()); n];
            for iy in 0..ny {
                for ix in 0..n {
                    col[ix] = data[ix * ny + iy];
                }
                fft.process(&mut col);
                for ix in 0..n {
                    data[ix * ny + iy] = col[ix];
                }
            }
        }
        if inverse {
            let s = T::one() / T::from_usize_lossy(n);
            data.iter_mut().for_each(|z| *z = *z * s);
        }
    }

    /// In-place transform over all axes. The inverse is normalized.
    pub fn fft(&self, data: &mut [Complex<T>], inverse: bool) {
        for axis in 0..self.grid.dims() {
            self.fft_axis(data, axis, inverse);
        }
    }

    /// Multiplies Fourier coefficients (transformed along `axis` only) by `mult(k_index)`.
    fn apply_axis_multiplier(
        &self,
        data: &mut [Complex<T>],
        axis: usize,
        mult: impl Fn(usize) -> Complex<T>,
    ) {
        let ny = self.grid.points(1);
        let stride_axis_is_last = axis + 1 == self.grid.dims();
        for (idx, z) in data.iter_mut().enumerate() {
            let j = if stride_axis_is_last && self.grid.dims() == 2 {
                idx % ny
            } else if self.grid.dims() == 2 {
                idx / ny
            } else {
                idx
            };
            *z = *z * mult(j);
        }
    }

    /// `∂_axis` of complex samples.
    pub fn derivative_complex(&self, data: &[Complex<T>], axis: usize) -> Vec<Complex<T>> {
        let mut buf = data.to_vec();
        self.fft_axis(&mut buf, axis, false);
        let k = &self.axes[axis].k_odd;
        self.apply_axis_multiplier(&mut buf, axis, |j| Complex::new(T::zero(), k[j]));
        self.fft_axis(&mut buf, axis, true);
        buf
    }

    /// `∂_axis` of real samples.
    pub fn derivative(&self, data: &[T], axis: usize) -> Vec<T> {
        let c: Vec<Complex<T>> = data.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.derivative_complex(&c, axis)
            .into_iter()
            .map(|z| z.re)
            .collect()
    }

    /// `∇²` of complex samples.
    pub fn laplacian_complex(&self, data: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); data.len()];
        for axis in 0..self.grid.dims() {
            let mut buf = data.to_vec();
            self.fft_axis(&mut buf, axis, false);
            let k2 = &self.axes[axis].k_sq;
            self.apply_axis_multiplier(&mut buf, axis, |j| Complex::new(-k2[j], T::zero()));
            self.fft_axis(&mut buf, axis, true);
            out.iter_mut().zip(buf).for_each(|(o, b)| *o = *o + b);
        }
        out
    }

    /// `∇²` of real samples.
    pub fn laplacian_values(&self, data: &[T]) -> Vec<T> {
        let c: Vec<Complex<T>> = data.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.laplacian_complex(&c)
            .into_iter()
            .map(|z| z.re)
            .collect()
    }

    pub fn gradient(&self, f: &ScalarField<T>) -> Result<VectorField<T>> {
        self.grid.ensure_same(f.grid())?;
        f.ensure_finite()?;
        let comps = (0..self.grid.dims())
            .map(|a| self.derivative(f.values(), a))
            .collect();
        VectorField::new(self.grid, comps)
    }

    pub fn laplacian(&self, f: &ScalarField<T>) -> Result<ScalarField<T>> {
        self.grid.ensure_same(f.grid())?;
        f.ensure_finite()?;
        ScalarField::new(self.grid, self.laplacian_values(f.values()))
    }

    pub fn divergence(&self, v: &VectorField<T>) -> Result<ScalarField<T>> {
        self.grid.ensure_same(v.grid())?;
        v.ensure_finite()?;
        let mut out = vec![T::zero(); self.grid.len()];
        for a in 0..self.grid.dims() {
            let d = self.derivative(v.component(a), a);
            out.iter_mut().zip(d).for_each(|(o, x)| *o += x);
        }
        ScalarField::new(self.grid, out)
    }
}

/// Spectral gradient of a real field.
pub fn gradient<T: Real>(f: &ScalarField<T>) -> Result<VectorField<T>> {
    Spectral::new(f.grid()).gradient(f)
}

/// Spectral Laplacian (`-k²` multiplier).
pub fn laplacian<T: Real>(f: &ScalarField<T>) -> Result<ScalarField<T>> {
    Spectral::new(f.grid()).laplacian(f)
}

/// Sum of per-axis spectral derivatives.
pub fn divergence<T: Real>(v: &VectorField<T>) -> Result<ScalarField<T>> {
    Spectral::new(v.grid()).divergence(v)
}

/// Second-order centred-difference Laplacian with periodic wrap (3-point in 1D, 5-point in 2D).
pub fn fd_laplacian_values<T: Real>(grid: &GridSpec<T>, data: &[T]) -> Result<Vec<T>> {
    if data.len() != grid.len() {
        return Err(Error::Dimension {
            expected: grid.len(),
            got: data.len(),
        });
    }
    let nx = grid.points(0);
    let ny = grid.points(1);
    let two = T::lit(2.0);
    let hx2 = grid.spacing(0) * grid.spacing(0);
    let mut out = vec![T::zero(); data.len()];
    for ix in 0..nx {
        let xm = (ix + nx - 1) % nx;
        let xp = (ix + 1) % nx;
        for iy in 0..ny {
            let c = data[ix * ny + iy];
            let mut v = (data[xm * ny + iy] - two * c + data[xp * ny + iy]) / hx2;
            if grid.dims() == 2 {
                let hy2 = grid.spacing(1) * grid.spacing(1);
                let ym = (iy + ny - 1) % ny;
                let yp = (iy + 1) % ny;
                v += (data[ix * ny + ym] - two * c + data[ix * ny + yp]) / hy2;
            }
            out[ix * ny + iy] = v;
        }
    }
    Ok(out)
}

/// Second-order centred-difference `∂_axis` with periodic wrap. Unlike the spectral derivative
/// it stays local, so a field that is only non-periodic at the seam (a harmonic potential)
/// is differentiated exactly away from the seam.
pub fn fd_derivative_values<T: Real>(
    grid: &GridSpec<T>,
    data: &[T],
    axis: usize,
) -> Result<Vec<T>> {
    if data.len() != grid.len() {
        return Err(Error::Dimension {
            expected: grid.len(),
            got: data.len(),
        });
    }
    let ny = grid.points(1);
    let n = grid.points(axis);
    let two_h = T::lit(2.0) * grid.spacing(axis);
    let out = (0..data.len())
        .map(|idx| {
            let (ix, iy) = grid.unflatten(idx);
            let (m, p) = if axis == 0 {
                let (xm, xp) = ((ix + n - 1) % n, (ix + 1) % n);
                (xm * ny + iy, xp * ny + iy)
            } else {
                let (ym, yp) = ((iy + n - 1) % n, (iy + 1) % n);
                (ix * ny + ym, ix * ny + yp)
            };
            (data[p] - data[m]) / two_h
        })
        .collect();
    Ok(out)
}

/// Eigenvalues of the periodic centred-difference second derivative, `-(4/h²) sin²(k h / 2)`,
/// in FFT order.
pub fn fd_second_derivative_symbol<T: Real>(n: usize, extent: T) -> Vec<T> {
    let h = extent / T::from_usize_lossy(n);
    let four = T::lit(4.0);
    wavenumbers(n, extent)
        .into_iter()
        .map(|k| {
            let s = Float::sin(k * h / T::lit(2.0));
            -four * s * s / (h * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line(n: usize, l: f64) -> GridSpec<f64> {
        GridSpec::line(0.0, l, n).unwrap()
    }

    #[test]
    fn wavenumber_layout() {
        let k = wavenumbers::<f64>(8, 2.0 * PI);
        assert_eq!(k, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
        let k = wavenumbers::<f64>(7, 2.0 * PI);
        assert_eq!(k, vec![0.0, 1.0, 2.0, 3.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = line(64, 5.0);
        let f = ScalarField::constant(g, 3.25);
        assert!(gradient(&f).unwrap().max_abs() < 1e-13);
        assert!(laplacian(&f).unwrap().max_abs() < 1e-13);
        let v = VectorField::new(g, vec![vec![-1.5; 64]]).unwrap();
        assert!(divergence(&v).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn sine_derivatives() {
        let l = 3.0;
        let g = line(256, l);
        let w = 2.0 * PI / l;
        let f = ScalarField::from_fn(g, |x, _| (w * x).sin());
        let d = gradient(&f).unwrap();
        let err = d
            .component(0)
            .iter()
            .enumerate()
            .map(|(i, v)| (v - w * (w * g.coord(0, i)).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
        let lap = laplacian(&f).unwrap();
        let err = lap
            .values()
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a + w * w * b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn gaussian_gradient_relative_l2() {
        let l = 16.0;
        let s = l / 16.0;
        let g = line(256, l);
        let f = ScalarField::from_fn(g, |x, _| (-(x - l / 2.0).powi(2) / (2.0 * s * s)).exp());
        let d = gradient(&f).unwrap().component_field(0);
        let exact = ScalarField::from_fn(g, |x, _| {
            -((x - l / 2.0) / (s * s)) * (-(x - l / 2.0).powi(2) / (2.0 * s * s)).exp()
        });
        let rel = d.l2_distance(&exact).unwrap() / exact.l2_norm();
        assert!(rel <= 1e-8, "{rel}");
    }

    #[test]
    fn laplacian_2d_product_of_sines() {
        let l = 2.0;
        let g = GridSpec::plane([0.0; 2], [l; 2], [32, 48]).unwrap();
        let w = 2.0 * PI / l;
        let f = ScalarField::from_fn(g, |x, y| (w * x).sin() * (w * y).sin());
        let lap = laplacian(&f).unwrap();
        let err = lap
            .values()
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a + 2.0 * w * w * b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn divergence_of_sine_component() {
        let l = 4.0;
        let g = GridSpec::plane([0.0; 2], [l; 2], [32, 32]).unwrap();
        let w = 2.0 * PI / l;
        let v = VectorField::new(
            g,
            vec![
                ScalarField::from_fn(g, |x, _| (w * x).sin()).into_values(),
                vec![0.0; g.len()],
            ],
        )
        .unwrap();
        let d = divergence(&v).unwrap();
        let exact = ScalarField::from_fn(g, |x, _| w * (w * x).cos());
        let err = d
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = GridSpec::plane([0.0; 2], [1.0; 2], [16, 16]).unwrap();
        let b = GridSpec::plane([0.0; 2], [2.0; 2], [16, 16]).unwrap();
        let v = VectorField::zeros(b);
        assert!(Spectral::new(&a).divergence(&v).is_err());
    }

    #[test]
    fn non_finite_input_rejected() {
        let g = line(16, 1.0);
        let mut vals = vec![0.0; 16];
        vals[5] = f64::INFINITY;
        let f = ScalarField::new(g, vals).unwrap();
        assert!(matches!(gradient(&f), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn fd_symbol_matches_stencil() {
        let l = 5.0;
        let n = 32;
        let g = line(n, l);
        let w = 2.0 * PI * 3.0 / l;
        let f = ScalarField::from_fn(g, |x, _| (w * x).cos());
        let lap = fd_laplacian_values(&g, f.values()).unwrap();
        let sym = fd_second_derivative_symbol::<f64>(n, l)[3];
        for (a, b) in lap.iter().zip(f.values()) {
            assert!((a - sym * b).abs() < 1e-10);
        }
    }
}

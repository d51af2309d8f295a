//! Periodic linear (1D) and bilinear (2D) interpolation of grid fields.

use std::ops::{Add, Mul};

use num_complex::Complex;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField, WaveField};
use crate::grid::GridSpec;
use crate::scalar::Real;

/// Interpolation stencil: up to four node indices with weights summing to one.
#[derive(Debug, Clone, Copy)]
pub struct Stencil<T> {
    pub nodes: [usize; 4],
    pub weights: [T; 4],
    pub len: usize,
}

impl<T: Real> Stencil<T> {
    /// Builds the stencil for position `x` (`x.len() == grid.dims()`), wrapping periodically.
    pub fn new(grid: &GridSpec<T>, x: &[T]) -> Result<Self> {
        if x.len() != grid.dims() {
            return Err(Error::Dimension {
                expected: grid.dims(),
                got: x.len(),
            });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "sample position",
                index,
            });
        }
        Ok(Self::new_unchecked(
            grid,
            x[0],
            x.get(1).copied().unwrap_or_else(T::zero),
        ))
    }

    /// Stencil without validation; `y` is ignored on 1D grids.
    #[inline]
    pub fn new_unchecked(grid: &GridSpec<T>, x: T, y: T) -> Self {
        let (i0, i1, fx) = axis_cell(grid, 0, x);
        if grid.dims() == 1 {
            return Self {
                nodes: [i0, i1, 0, 0],
                weights: [T::one() - fx, fx, T::zero(), T::zero()],
                len: 2,
            };
        }
        let (j0, j1, fy) = axis_cell(grid, 1, y);
        let ny = grid.points(1);
        let gx = T::one() - fx;
        let gy = T::one() - fy;
        Self {
            nodes: [i0 * ny + j0, i0 * ny + j1, i1 * ny + j0, i1 * ny + j1],
            weights: [gx * gy, gx * fy, fx * gy, fx * fy],
            len: 4,
        }
    }

    #[inline]
    pub fn apply<V>(&self, values: &[V]) -> V
    where
        V: Copy + Add<Output = V> + Mul<T, Output = V>,
    {
        let mut acc = values[self.nodes[0]] * self.weights[0];
        for k in 1..self.len {
            acc = acc + values[self.nodes[k]] * self.weights[k];
        }
        acc
    }

    /// Node indices that carry weight.
    pub fn active_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len)
            .filter(|&k| self.weights[k] > T::zero())
            .map(|k| self.nodes[k])
    }
}

#[inline]
fn axis_cell<T: Real>(grid: &GridSpec<T>, axis: usize, x: T) -> (usize, usize, T) {
    let n = grid.points(axis);
    let h = grid.spacing(axis);
    let xw = grid.wrap(axis, x);
    let s = (xw - grid.origin(axis)) / h;
    let fl = Float::floor(s);
    let mut i0 = fl.to_usize().unwrap_or(0);
    let mut frac = s - fl;
    if i0 >= n {
        i0 = n - 1;
        frac = T::one();
    }
    (i0, (i0 + 1) % n, frac)
}

/// Interpolated value of a real field at `x`.
pub fn sample_scalar<T: Real>(f: &ScalarField<T>, x: &[T]) -> Result<T> {
    Ok(Stencil::new(f.grid(), x)?.apply(f.values()))
}

/// Interpolated value of a wave field at `x`.
pub fn sample_wave<T: Real>(f: &WaveField<T>, x: &[T]) -> Result<Complex<T>> {
    Ok(Stencil::new(f.grid(), x)?.apply(f.values()))
}

/// Interpolated vector at `x`; the `y` slot is zero on 1D grids.
pub fn sample_vector<T: Real>(f: &VectorField<T>, x: &[T]) -> Result<[T; 2]> {
    let st = Stencil::new(f.grid(), x)?;
    let mut out = [T::zero(); 2];
    for (a, o) in out.iter_mut().enumerate().take(f.dims()) {
        *o = st.apply(f.component(a));
    }
    Ok(out)
}

/// Anything that can be sampled at a point.
pub trait SampleAt<T: Real> {
    type Output;
    fn sample_at(&self, x: &[T]) -> Result<Self::Output>;
}

impl<T: Real> SampleAt<T> for ScalarField<T> {
    type Output = T;
    fn sample_at(&self, x: &[T]) -> Result<T> {
        sample_scalar(self, x)
    }
}

impl<T: Real> SampleAt<T> for WaveField<T> {
    type Output = Complex<T>;
    fn sample_at(&self, x: &[T]) -> Result<Complex<T>> {
        sample_wave(self, x)
    }
}

impl<T: Real> SampleAt<T> for VectorField<T> {
    type Output = [T; 2];
    fn sample_at(&self, x: &[T]) -> Result<[T; 2]> {
        sample_vector(self, x)
    }
}

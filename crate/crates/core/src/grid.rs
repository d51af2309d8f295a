//! Uniform periodic grids in one or two dimensions.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Minimum number of points per axis.
pub const MIN_POINTS: usize = 8;

/// Uniform periodic grid. Node `i` on axis `a` sits at `origin[a] + i * spacing[a]`; the
/// domain is `[origin, origin + extent)` and wraps around.
///
/// One-dimensional grids keep `points[1] == 1` so that flat indexing is shared with 2D:
/// `index = ix * points[1] + iy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    dims: usize,
    origin: [T; 2],
    extent: [T; 2],
    points: [usize; 2],
}

impl<T: Real> GridSpec<T> {
    /// A 1D grid covering `[origin, origin + extent)` with `points` nodes.
    pub fn line(origin: T, extent: T, points: usize) -> Result<Self> {
        let grid = Self {
            dims: 1,
            origin: [origin, T::zero()],
            extent: [extent, T::one()],
            points: [points, 1],
        };
        grid.validate()?;
        Ok(grid)
    }

    /// A 1D grid symmetric about zero: `[-half_width, half_width)`.
    pub fn centered_line(half_width: T, points: usize) -> Result<Self> {
        Self::line(-half_width, half_width + half_width, points)
    }

    /// A 2D grid; axis 0 is `x`, axis 1 is `y`.
    pub fn plane(origin: [T; 2], extent: [T; 2], points: [usize; 2]) -> Result<Self> {
        let grid = Self {
            dims: 2,
            origin,
            extent,
            points,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// A square 2D grid symmetric about the origin.
    pub fn centered_plane(half_width: T, points: usize) -> Result<Self> {
        let ext = half_width + half_width;
        Self::plane([-half_width; 2], [ext; 2], [points; 2])
    }

    /// Cartesian product of two 1D grids.
    pub fn product(x: &GridSpec<T>, y: &GridSpec<T>) -> Result<Self> {
        if x.dims != 1 || y.dims != 1 {
            return Err(Error::InvalidGrid("product expects two 1D grids".into()));
        }
        Self::plane(
            [x.origin[0], y.origin[0]],
            [x.extent[0], y.extent[0]],
            [x.points[0], y.points[0]],
        )
    }

    /// The 1D grid of one axis.
    pub fn axis_grid(&self, axis: usize) -> Result<Self> {
        Self::line(self.origin[axis], self.extent[axis], self.points[axis])
    }

    fn validate(&self) -> Result<()> {
        for axis in 0..self.dims {
            if self.points[axis] < MIN_POINTS {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} has {} points, need at least {MIN_POINTS}",
                    self.points[axis]
                )));
            }
            let ext = self.extent[axis];
            if !ext.is_finite() || ext <= T::zero() {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} extent must be positive"
                )));
            }
            if !self.origin[axis].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} origin is not finite"
                )));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn origin(&self, axis: usize) -> T {
        self.origin[axis]
    }

    pub fn extent(&self, axis: usize) -> T {
        self.extent[axis]
    }

    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn spacing(&self, axis: usize) -> T {
        self.extent[axis] / T::from_usize_lossy(self.points[axis])
    }

    /// Always true: only periodic grids are supported.
    pub fn periodic(&self) -> bool {
        true
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.points[0] * self.points[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume (length in 1D, area in 2D) of one grid cell.
    pub fn cell_volume(&self) -> T {
        (0..self.dims)
            .map(|a| self.spacing(a))
            .fold(T::one(), |acc, h| acc * h)
    }

    /// Volume of the whole domain.
    pub fn volume(&self) -> T {
        (0..self.dims)
            .map(|a| self.extent[a])
            .fold(T::one(), |acc, e| acc * e)
    }

    /// Coordinate of node `i` along `axis`.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> T {
        self.origin[axis] + T::from_usize_lossy(i) * self.spacing(axis)
    }

    /// All node coordinates along `axis`.
    pub fn coords(&self, axis: usize) -> Vec<T> {
        (0..self.points[axis])
            .map(|i| self.coord(axis, i))
            .collect()
    }

    /// Flat index of node `(ix, iy)`.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.points[1] + iy
    }

    /// Inverse of [`GridSpec::index`].
    #[inline]
    pub fn unflatten(&self, idx: usize) -> (usize, usize) {
        (idx / self.points[1], idx % self.points[1])
    }

    /// Position of the node with flat index `idx` (the `y` slot is zero in 1D).
    pub fn position(&self, idx: usize) -> [T; 2] {
        let (ix, iy) = self.unflatten(idx);
        let y = if self.dims == 2 {
            self.coord(1, iy)
        } else {
            T::zero()
        };
        [self.coord(0, ix), y]
    }

    /// Wraps `x` into `[origin, origin + extent)` on `axis`.
    #[inline]
    pub fn wrap(&self, axis: usize, x: T) -> T {
        let o = self.origin[axis];
        let l = self.extent[axis];
        let mut r = (x - o) % l;
        if r < T::zero() {
            r += l;
        }
        // `r` can round up to exactly `l`
        if r >= l {
            r = T::zero();
        }
        o + r
    }

    /// Same shape and geometry, compared with a relative tolerance.
    pub fn same_as(&self, other: &Self) -> bool {
        if self.dims != other.dims || self.points != other.points {
            return false;
        }
        let tol = T::lit(1e-12);
        (0..self.dims).all(|a| {
            let scale = Float::max(T::one(), Float::abs(self.extent[a]));
            Float::abs(self.origin[a] - other.origin[a]) <= tol * scale
                && Float::abs(self.extent[a] - other.extent[a]) <= tol * scale
        })
    }

    pub fn ensure_same(&self, other: &Self) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(GridSpec::<f64>::line(0.0, 1.0, 4).is_err());
        assert!(GridSpec::<f64>::line(0.0, 0.0, 16).is_err());
        assert!(GridSpec::<f64>::line(0.0, f64::NAN, 16).is_err());
        assert!(GridSpec::<f64>::plane([0.0; 2], [1.0, 1.0], [16, 7]).is_err());
    }

    #[test]
    fn cell_volume_times_count_is_domain_volume() {
        let g = GridSpec::<f64>::plane([-3.0, 1.0], [7.3, 2.9], [48, 40]).unwrap();
        let v = g.cell_volume() * g.len() as f64;
        assert!((v - g.volume()).abs() <= 1e-14 * g.volume());
        let l = GridSpec::<f64>::line(0.0, 24.0, 512).unwrap();
        assert!((l.cell_volume() * 512.0 - 24.0).abs() <= 1e-14);
    }

    #[test]
    fn wrap_maps_into_domain() {
        let g = GridSpec::<f64>::centered_line(4.0, 16).unwrap();
        assert_eq!(g.wrap(0, 4.5), -3.5);
        assert_eq!(g.wrap(0, -4.5), 3.5);
        assert_eq!(g.wrap(0, 1.25), 1.25);
        let w = g.wrap(0, -4.0 - 1e-17);
        assert!((-4.0..4.0).contains(&w));
    }

    #[test]
    fn flat_index_round_trip() {
        let g = GridSpec::<f64>::plane([0.0; 2], [1.0; 2], [8, 12]).unwrap();
        for idx in [0, 5, 11, 12, 95] {
            let (ix, iy) = g.unflatten(idx);
            assert_eq!(g.index(ix, iy), idx);
        }
    }
}

use num_traits::Float;

use crate::error::{Error, Result};
use crate::field::{ScalarField, WaveField};
use crate::grid::GridSpec;
use crate::scalar::Real;

use super::ensemble::TrajectoryEnsemble;

/// Smallest number of trajectories for which [`equivariance_distance`] is meaningful.
pub const MIN_EQUIVARIANCE_SAMPLES: usize = 10_000;
/// Smallest coarse-graining cell, in grid spacings.
pub const MIN_CELL_SPACINGS: usize = 4;

/// Bins made of whole grid cells. Node `i` owns `[x_i - h/2, x_i + h/2)`, so bin `b` on an
/// axis with stride `s` covers nodes `b s .. (b + 1) s`.
#[derive(Debug, Clone)]
pub struct HistogramGrid<T> {
    grid: GridSpec<T>,
    bins: [usize; 2],
    stride: [usize; 2],
    mass: Vec<f64>,
}

impl<T: Real> HistogramGrid<T> {
    /// `bins` per axis; each must divide the number of grid points on that axis.
    pub fn aligned(grid: &GridSpec<T>, bins: usize) -> Result<Self> {
        let dims = grid.dims();
        let mut b = [1usize; 2];
        let mut stride = [1usize; 2];
        for a in 0..dims {
            let n = grid.points(a);
            if bins == 0 || n % bins != 0 {
                return Err(Error::Config(format!(
                    "{bins} bins do not tile the {n} cells of axis {a}"
                )));
            }
            b[a] = bins;
            stride[a] = n / bins;
        }
        Ok(Self {
            grid: *grid,
            bins: b,
            stride,
            mass: vec![0.0; b[0] * b[1]],
        })
    }

    /// Square cells of side `cell_size`, which must be a whole number (at least four) of
    /// grid spacings dividing every axis.
    pub fn with_cell_size(grid: &GridSpec<T>, cell_size: T) -> Result<Self> {
        let h = grid.spacing(0);
        let s = (cell_size / h).as_f64();
        let k = s.round() as usize;
        if (s - k as f64).abs() > 1e-9 || k < MIN_CELL_SPACINGS {
            return Err(Error::Config(format!(
                "cell size {cell_size} must be a whole number of at least {MIN_CELL_SPACINGS} spacings (h = {h})"
            )));
        }
        if grid.dims() == 2 && Float::abs(grid.spacing(1) - h) > T::lit(1e-12) * h {
            return Err(Error::Config(
                "coarse-graining cells need equal spacings".into(),
            ));
        }
        if grid.points(0) % k != 0 {
            return Err(Error::Config(format!(
                "cell of {k} spacings does not tile {} points",
                grid.points(0)
            )));
        }
        let hist = Self::aligned(grid, grid.points(0) / k)?;
        if hist.stride[..grid.dims()].iter().any(|&st| st != k) {
            return Err(Error::Config("cells must tile both axes".into()));
        }
        Ok(hist)
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    /// Bin edges along `axis`.
    pub fn edges(&self, axis: usize) -> Vec<T> {
        let h = self.grid.spacing(axis);
        let lo = self.grid.origin(axis) - T::lit(0.5) * h;
        let w = h * T::from_usize_lossy(self.stride[axis]);
        (0..=self.bins[axis])
            .map(|b| lo + w * T::from_usize_lossy(b))
            .collect()
    }

    pub fn bin_volume(&self) -> T {
        self.grid.cell_volume() * T::from_usize_lossy(self.stride[0] * self.stride[1])
    }

    /// Bin holding position `p`.
    #[inline]
    pub fn bin_of(&self, p: [T; 2]) -> usize {
        let mut idx = [0usize; 2];
        for (a, i) in idx.iter_mut().enumerate().take(self.grid.dims()) {
            let h = self.grid.spacing(a);
            let n = self.grid.points(a);
            let u = ((p[a] - self.grid.origin(a)) / h + T::lit(0.5)).as_f64();
            let node = (Float::floor(u) as i64).rem_euclid(n as i64) as usize;
            *i = node / self.stride[a];
        }
        idx[0] * self.bins[1] + idx[1]
    }

    /// Fills with the (weighted) positions and normalizes the masses to one.
    pub fn fill(&mut self, positions: &[[T; 2]], weights: Option<&[f64]>) {
        self.mass.iter_mut().for_each(|m| *m = 0.0);
        for (i, &p) in positions.iter().enumerate() {
            let b = self.bin_of(p);
            self.mass[b] += weights.map_or(1.0, |w| w[i]);
        }
        normalize(&mut self.mass);
    }

    /// Bin masses of `ρ`, normalized to one.
    pub fn density_masses(&self, rho: &ScalarField<T>) -> Result<Vec<f64>> {
        self.grid.ensure_same(rho.grid())?;
        let mut m = vec![0.0; self.mass.len()];
        let ny = self.grid.points(1);
        for (idx, &r) in rho.values().iter().enumerate() {
            let (ix, iy) = (idx / ny, idx % ny);
            m[(ix / self.stride[0]) * self.bins[1] + iy / self.stride[1]] += r.as_f64();
        }
        normalize(&mut m);
        Ok(m)
    }

    /// Bin masses.
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Bin masses divided by the bin volume.
    pub fn density(&self) -> Vec<f64> {
        let v = self.bin_volume().as_f64();
        self.mass.iter().map(|m| m / v).collect()
    }

    /// `∫` of [`HistogramGrid::density`].
    pub fn integral(&self) -> f64 {
        let v = self.bin_volume().as_f64();
        self.density().iter().sum::<f64>() * v
    }
}

fn normalize(m: &mut [f64]) {
    let total: f64 = m.iter().sum();
    if total > 0.0 {
        m.iter_mut().for_each(|v| *v /= total);
    }
}

/// `Σ_c P̄ ln(P̄/ρ̄)` over cells given cell masses; `+∞` if `P̄ > 0` where `ρ̄ = 0`.
pub fn relative_entropy(p: &[f64], rho: &[f64]) -> f64 {
    p.iter()
        .zip(rho)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &r)| {
            if r > 0.0 {
                p * (p / r).ln()
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

/// `∫ |P̂ - |Ψ|²|` over `bins` bins per axis, for ensembles of at least
/// [`MIN_EQUIVARIANCE_SAMPLES`] trajectories.
pub fn equivariance_distance<T: Real>(
    ens: &TrajectoryEnsemble<T>,
    psi: &WaveField<T>,
    bins: usize,
) -> Result<f64> {
    if ens.len() < MIN_EQUIVARIANCE_SAMPLES {
        return Err(Error::Config(format!(
            "equivariance needs at least {MIN_EQUIVARIANCE_SAMPLES} trajectories, got {}",
            ens.len()
        )));
    }
    histogram_l1(ens, psi, bins)
}

/// Same distance as [`equivariance_distance`] without the sample-size guard; small
/// ensembles are dominated by sampling noise.
pub fn histogram_l1<T: Real>(
    ens: &TrajectoryEnsemble<T>,
    psi: &WaveField<T>,
    bins: usize,
) -> Result<f64> {
    let mut hist = HistogramGrid::aligned(ens.grid(), bins)?;
    hist.fill(ens.positions(), None);
    let rho = hist.density_masses(&psi.density())?;
    Ok(hist
        .masses()
        .iter()
        .zip(&rho)
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// Coarse-grained H-function `H̄ = Σ_c P̄ ln(P̄/ρ̄) ΔV` with cell averages `P̄`, `ρ̄`.
pub fn coarse_grained_h<T: Real>(
    ens: &TrajectoryEnsemble<T>,
    psi: &WaveField<T>,
    cell_size: T,
) -> Result<f64> {
    let mut hist = HistogramGrid::with_cell_size(ens.grid(), cell_size)?;
    hist.fill(ens.positions(), None);
    let rho = hist.density_masses(&psi.density())?;
    Ok(relative_entropy(hist.masses(), &rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohm::sampling::{quantile_ensemble, sample_equilibrium};
    use crate::constants::Constants;
    use num_complex::Complex;

    fn gaussian_psi(g: GridSpec<f64>, s: f64) -> WaveField<f64> {
        WaveField::from_fn(g, |x, _| Complex::new((-x * x / (4.0 * s * s)).exp(), 0.0))
            .normalized()
            .unwrap()
    }

    #[test]
    fn edges_and_normalization() {
        let g = GridSpec::centered_line(4.0, 64).unwrap();
        let mut h = HistogramGrid::aligned(&g, 16).unwrap();
        let e = h.edges(0);
        assert_eq!(e.len(), 17);
        assert!((e[0] - (-4.0 - 0.0625)).abs() < 1e-12);
        assert!((e[1] - e[0] - 0.5).abs() < 1e-12);
        let pts: Vec<[f64; 2]> = (0..1000)
            .map(|i| [-4.0 + 8.0 * i as f64 / 1000.0, 0.0])
            .collect();
        h.fill(&pts, None);
        assert!((h.integral() - 1.0).abs() <= 1e-9);
        assert!(HistogramGrid::aligned(&g, 10).is_err());
    }

    #[test]
    fn sampled_ensemble_is_close() {
        let g = GridSpec::centered_line(12.0, 512).unwrap();
        let psi = gaussian_psi(g, 1.0);
        let e = sample_equilibrium(&psi.density(), 100_000, 11, Constants::default()).unwrap();
        assert!(equivariance_distance(&e, &psi, 64).unwrap() <= 0.02);
    }

    #[test]
    fn quantile_ensemble_is_within_bins_over_n() {
        let g = GridSpec::centered_line(12.0, 512).unwrap();
        let psi = gaussian_psi(g, 1.3);
        let n = 20_000;
        let e = quantile_ensemble(&psi.density(), n, Constants::default()).unwrap();
        assert!(equivariance_distance(&e, &psi, 64).unwrap() <= 64.0 / n as f64);
    }

    #[test]
    fn uniform_against_gaussian_is_far() {
        // L1 between U[-L, L) and a Gaussian of width s ≪ L tends to 2 - 2·(2L)⁻¹ ∫ ≈ 2 - 2√(2π)s/2L
        let g = GridSpec::centered_line(12.0, 512).unwrap();
        let psi = gaussian_psi(g, 1.0);
        let flat = ScalarField::constant(g, 1.0);
        let e = quantile_ensemble(&flat, 20_000, Constants::default()).unwrap();
        let d = equivariance_distance(&e, &psi, 64).unwrap();
        assert!(d >= 0.5, "{d}");
    }

    #[test]
    fn h_is_zero_at_equilibrium_and_positive_otherwise() {
        assert_eq!(relative_entropy(&[0.25, 0.75], &[0.25, 0.75]), 0.0);
        assert!(relative_entropy(&[0.3, 0.7], &[0.25, 0.75]) > 0.0);
        assert_eq!(relative_entropy(&[0.0, 1.0], &[0.5, 0.5]), 2f64.ln());
        assert_eq!(relative_entropy(&[0.5, 0.5], &[0.0, 1.0]), f64::INFINITY);

        let g = GridSpec::centered_line(12.0, 512).unwrap();
        let psi = gaussian_psi(g, 1.0);
        let flat = ScalarField::constant(g, 1.0);
        let e = quantile_ensemble(&flat, 20_000, Constants::default()).unwrap();
        let h = coarse_grained_h(&e, &psi, 8.0 * g.spacing(0)).unwrap();
        assert!(h > 0.5);
    }

    #[test]
    fn cell_size_is_validated() {
        let g = GridSpec::<f64>::centered_plane(8.0, 128).unwrap();
        let h = g.spacing(0);
        assert!(HistogramGrid::with_cell_size(&g, 8.0 * h).is_ok());
        assert!(HistogramGrid::with_cell_size(&g, 2.0 * h).is_err());
        assert!(HistogramGrid::with_cell_size(&g, 6.5 * h).is_err());
        assert!(HistogramGrid::with_cell_size(&g, 6.0 * h).is_err());
    }
}

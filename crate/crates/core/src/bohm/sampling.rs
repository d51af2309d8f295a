use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::GridSpec;
use crate::scalar::Real;

use super::ensemble::TrajectoryEnsemble;

/// Independent stream for item `index` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Cumulative cell masses `C[0] = 0, …, C[n] = 1` of `ρ` seen as constant on the cell
/// `[x_i - h/2, x_i + h/2)` around each node.
fn cell_cdf<T: Real>(rho: &ScalarField<T>) -> Result<Vec<f64>> {
    rho.ensure_finite()?;
    if let Some(i) = rho.values().iter().position(|&r| r < T::zero()) {
        return Err(Error::Config(format!("density is negative at node {i}")));
    }
    let total: f64 = rho.values().iter().map(|r| r.as_f64()).sum();
    if !(total > 0.0) {
        return Err(Error::Config("density has zero mass".into()));
    }
    let mut cdf = Vec::with_capacity(rho.values().len() + 1);
    let mut acc = 0.0;
    cdf.push(0.0);
    for r in rho.values() {
        acc += r.as_f64() / total;
        cdf.push(acc);
    }
    Ok(cdf)
}

/// Cell `j` with `C[j] ≤ u < C[j+1]` and the fraction of its mass below `u`.
fn locate(cdf: &[f64], u: f64) -> (usize, f64) {
    let n = cdf.len() - 1;
    let j = cdf.partition_point(|&c| c <= u).clamp(1, n) - 1;
    let w = cdf[j + 1] - cdf[j];
    let frac = if w > 0.0 {
        ((u - cdf[j]) / w).clamp(0.0, 1.0)
    } else {
        0.5
    };
    (j, frac)
}

fn place<T: Real>(grid: &GridSpec<T>, cell: usize, fx: f64, fy: f64) -> [T; 2] {
    let (ix, iy) = grid.unflatten(cell);
    let half = T::lit(0.5);
    let x = grid.coord(0, ix) + (T::lit(fx) - half) * grid.spacing(0);
    let y = if grid.dims() == 2 {
        grid.coord(1, iy) + (T::lit(fy) - half) * grid.spacing(1)
    } else {
        T::zero()
    };
    [x, y]
}

/// `n` independent draws from `ρ` (normalized internally), each node carrying the mass of
/// its surrounding cell.
///
/// 1D uses the inverse of the piecewise-linear CDF; 2D picks a cell by its mass and places
/// the point uniformly inside it. Draw `i` uses its own stream of `seed`.
pub fn sample_equilibrium<T: Real>(
    rho: &ScalarField<T>,
    n: usize,
    seed: u64,
    constants: Constants<T>,
) -> Result<TrajectoryEnsemble<T>> {
    let cdf = cell_cdf(rho)?;
    let grid = *rho.grid();
    let positions = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let u: f64 = rng.random();
            let (cell, frac) = locate(&cdf, u);
            if grid.dims() == 1 {
                place(&grid, cell, frac, 0.0)
            } else {
                let fx: f64 = rng.random();
                let fy: f64 = rng.random();
                place(&grid, cell, fx, fy)
            }
        })
        .collect();
    TrajectoryEnsemble::new(grid, positions, seed, constants)
}

/// Deterministic stratified placement `x_k = F⁻¹((k + 1/2)/n)` on a 1D grid.
pub fn quantile_ensemble<T: Real>(
    rho: &ScalarField<T>,
    n: usize,
    constants: Constants<T>,
) -> Result<TrajectoryEnsemble<T>> {
    if rho.grid().dims() != 1 {
        return Err(Error::Config("quantile placement needs a 1D grid".into()));
    }
    let cdf = cell_cdf(rho)?;
    let positions = (0..n)
        .map(|k| {
            let (cell, frac) = locate(&cdf, (k as f64 + 0.5) / n as f64);
            place(rho.grid(), cell, frac, 0.0)
        })
        .collect();
    TrajectoryEnsemble::new(*rho.grid(), positions, 0, constants)
}

/// Kolmogorov–Smirnov distance between 1D samples and the cell CDF of `ρ`.
///
/// Positions are unwrapped onto `[origin - h/2, origin + L - h/2)`, the support of the cells.
pub fn ks_statistic<T: Real>(samples: &[[T; 2]], rho: &ScalarField<T>) -> Result<f64> {
    let grid = rho.grid();
    if grid.dims() != 1 {
        return Err(Error::Config("ks_statistic needs a 1D grid".into()));
    }
    let cdf = cell_cdf(rho)?;
    let h = grid.spacing(0).as_f64();
    let lo = grid.origin(0).as_f64() - 0.5 * h;
    let l = grid.extent(0).as_f64();
    let mut s: Vec<f64> = samples
        .iter()
        .map(|p| (p[0].as_f64() - lo).rem_euclid(l) / h)
        .collect();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let cells = cdf.len() - 1;
    let f = |u: f64| {
        let j = (Float::floor(u) as usize).min(cells - 1);
        cdf[j] + (u - j as f64) * (cdf[j + 1] - cdf[j])
    };
    let mut d: f64 = 0.0;
    for (i, &u) in s.iter().enumerate() {
        let fu = f(u);
        d = d
            .max((fu - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - fu).abs());
    }
    Ok(d)
}

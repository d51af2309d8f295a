//! Lowest eigenpairs of the finite-difference Hamiltonian on a periodic 1D grid.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::{ScalarField, WaveField};
use crate::scalar::Real;

/// An energy level and its real, unit-norm eigenfunction.
#[derive(Debug, Clone)]
pub struct Eigenpair<T> {
    pub energy: T,
    pub state: WaveField<T>,
}

const MAX_SWEEPS: usize = 10_000;

/// Lowest `count` eigenpairs of `H = -(ħ²/2m) D₂ + U` where `D₂` is the periodic 3-point
/// second difference.
///
/// Eigenfunctions are real with `∫ φ² dx = 1`; the sign is fixed so that the first node
/// with `|φ| > 10⁻³ max|φ|` is positive. The diagonalisation runs in `f64`.
pub fn stationary_states<T: Real>(
    potential: &ScalarField<T>,
    constants: &Constants<T>,
    count: usize,
) -> Result<Vec<Eigenpair<T>>> {
    let grid = *potential.grid();
    if grid.dims() != 1 {
        return Err(Error::Config("stationary_states needs a 1D grid".into()));
    }
    potential.ensure_finite()?;
    let n = grid.len();
    if count == 0 || count > n {
        return Err(Error::Config(format!(
            "cannot extract {count} states from {n} nodes"
        )));
    }
    let h = grid.spacing(0).as_f64();
    let t = (constants.hbar * constants.hbar / constants.mass).as_f64() / (2.0 * h * h);
    let u: Vec<f64> = potential.values().iter().map(|v| v.as_f64()).collect();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 2.0 * t + u[i];
        let j = (i + 1) % n;
        m[(i, j)] -= t;
        m[(j, i)] -= t;
    }
    let scale = m.amax().max(1.0);
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, MAX_SWEEPS)
        .ok_or_else(|| Error::Eigensolver("symmetric QR iteration did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let norm = 1.0 / h.sqrt();
    let mut out = Vec::with_capacity(count);
    for &k in order.iter().take(count) {
        let energy = eig.eigenvalues[k];
        let col = eig.eigenvectors.column(k);
        let residual = (&m * col - col * energy).amax();
        if residual > 1e-9 * scale {
            return Err(Error::Eigensolver(format!(
                "residual {residual:e} for eigenvalue {energy} exceeds tolerance"
            )));
        }
        let peak = col.amax();
        let sign = col
            .iter()
            .find(|v| v.abs() > 1e-3 * peak)
            .map(|v| v.signum())
            .unwrap_or(1.0);
        let values = col
            .iter()
            .map(|&v| Complex::new(T::lit(sign * v * norm), T::zero()))
            .collect();
        out.push(Eigenpair {
            energy: T::lit(energy),
            state: WaveField::new(grid, values)?,
        });
    }
    Ok(out)
}

//! Closed-form eigenfunctions of the harmonic oscillator.

use num_complex::Complex;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::GridSpec;
use crate::scalar::Real;

/// `φ_n(x) = (mω/πħ)^{1/4} (2ⁿ n!)^{-1/2} H_n(ξ) e^{-ξ²/2}`, `ξ = √(mω/ħ) x`, evaluated with
/// the normalized three-term recurrence.
pub fn hermite_function<T: Real>(n: usize, x: T, omega: T, constants: &Constants<T>) -> T {
    let alpha = (constants.mass * omega / constants.hbar).sqrt();
    let xi = alpha * x;
    let mut prev = T::zero();
    let mut cur = (alpha / T::PI().sqrt()).sqrt() * (-xi * xi / T::lit(2.0)).exp();
    for k in 0..n {
        let kf = T::from_usize_lossy(k);
        let next = (T::lit(2.0) / (kf + T::one())).sqrt() * xi * cur
            - (kf / (kf + T::one())).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Energy `ħω(n + 1/2)`.
pub fn harmonic_energy<T: Real>(n: usize, omega: T, constants: &Constants<T>) -> T {
    constants.hbar * omega * (T::from_usize_lossy(n) + T::lit(0.5))
}

/// `φ_n` on a 1D grid, or `φ_{n}(x) φ_{n_y}(y)` with frequencies `omega` on a 2D grid.
pub fn harmonic_state<T: Real>(
    grid: &GridSpec<T>,
    n: [usize; 2],
    omega: [T; 2],
    constants: &Constants<T>,
) -> Result<WaveField<T>> {
    if !(omega[0] > T::zero() && (grid.dims() == 1 || omega[1] > T::zero())) {
        return Err(Error::Config("trap frequencies must be positive".into()));
    }
    let two_d = grid.dims() == 2;
    Ok(WaveField::from_fn(*grid, |x, y| {
        let mut v = hermite_function(n[0], x, omega[0], constants);
        if two_d {
            v *= hermite_function(n[1], y, omega[1], constants);
        }
        Complex::new(v, T::zero())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{stationary_states, Potential};

    #[test]
    fn orthonormal_on_a_fine_grid() {
        let g = GridSpec::<f64>::centered_line(12.0, 512).unwrap();
        let c = Constants::new(1.0, 1.0).unwrap();
        let s: Vec<_> = (0..6)
            .map(|n| harmonic_state(&g, [n, 0], [1.3, 0.0], &c).unwrap())
            .collect();
        for (i, a) in s.iter().enumerate() {
            for (j, b) in s.iter().enumerate() {
                let ov = a.inner(b).unwrap().re;
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((ov - target).abs() < 1e-12, "{i} {j} {ov}");
            }
        }
    }

    #[test]
    fn matches_the_finite_difference_eigenvectors() {
        let g = GridSpec::<f64>::centered_line(10.0, 1024).unwrap();
        let c = Constants::default();
        let u = Potential::Harmonic { omega: 1.0 }.realize(&g, &c).unwrap();
        let fd = stationary_states(&u, &c, 3).unwrap();
        for (n, e) in fd.iter().enumerate() {
            let exact = harmonic_state(&g, [n, 0], [1.0, 0.0], &c).unwrap();
            let ov = e.state.inner(&exact).unwrap().re.abs();
            assert!((ov - 1.0).abs() < 1e-5, "{n} {ov}");
            assert!((e.energy - harmonic_energy(n, 1.0, &c)).abs() < 1e-3);
        }
    }
}

use num_traits::Float;

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::GridSpec;
use crate::scalar::Real;

/// Time-independent external potential `U`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential<T> {
    Free,
    /// `½ m ω² |r|²`, centred at the coordinate origin (summed over both axes in 2D).
    Harmonic {
        omega: T,
    },
    /// Rectangular barrier along axis 0: `height` on `|x - center| < width / 2`.
    Barrier {
        height: T,
        width: T,
        center: T,
    },
    /// Values supplied on a grid.
    Tabulated(ScalarField<T>),
}

impl<T: Real> Potential<T> {
    /// Samples the potential on `grid`.
    pub fn realize(&self, grid: &GridSpec<T>, constants: &Constants<T>) -> Result<ScalarField<T>> {
        let field = match self {
            Potential::Free => ScalarField::zeros(*grid),
            Potential::Harmonic { omega } => {
                let k = T::lit(0.5) * constants.mass * *omega * *omega;
                let two_d = grid.dims() == 2;
                ScalarField::from_fn(*grid, |x, y| {
                    let r2 = if two_d { x * x + y * y } else { x * x };
                    k * r2
                })
            }
            Potential::Barrier {
                height,
                width,
                center,
            } => {
                let half = *width / T::lit(2.0);
                ScalarField::from_fn(*grid, |x, _| {
                    if Float::abs(x - *center) < half {
                        *height
                    } else {
                        T::zero()
                    }
                })
            }
            Potential::Tabulated(f) => {
                grid.ensure_same(f.grid())?;
                f.clone()
            }
        };
        if field.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("potential has non-finite values".into()));
        }
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_is_half_m_omega_squared_r_squared() {
        let g = GridSpec::<f64>::plane([-2.0; 2], [4.0; 2], [8, 8]).unwrap();
        let c = Constants::new(1.0, 2.0).unwrap();
        let u = Potential::Harmonic { omega: 3.0 }.realize(&g, &c).unwrap();
        let i = g.index(7, 2);
        let p = g.position(i);
        assert!((u.values()[i] - 0.5 * 2.0 * 9.0 * (p[0] * p[0] + p[1] * p[1])).abs() < 1e-12);
    }

    #[test]
    fn barrier_profile() {
        let g = GridSpec::<f64>::line(0.0, 8.0, 8).unwrap();
        let u = Potential::Barrier {
            height: 5.0,
            width: 2.5,
            center: 4.0,
        }
        .realize(&g, &Constants::default())
        .unwrap();
        assert_eq!(u.values(), &[0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 0.0, 0.0]);
    }

    #[test]
    fn tabulated_grid_must_match() {
        let g = GridSpec::<f64>::line(0.0, 8.0, 8).unwrap();
        let h = GridSpec::<f64>::line(0.0, 9.0, 8).unwrap();
        let p = Potential::Tabulated(ScalarField::zeros(h));
        assert!(p.realize(&g, &Constants::default()).is_err());
        let mut v = vec![0.0; 8];
        v[2] = f64::NAN;
        let p = Potential::Tabulated(ScalarField::new(g, v).unwrap());
        assert!(p.realize(&g, &Constants::default()).is_err());
    }
}

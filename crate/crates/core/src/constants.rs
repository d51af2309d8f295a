use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Physical constants in simulation units. Defaults to `ħ = m = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants<T> {
    pub hbar: T,
    pub mass: T,
}

impl<T: Real> Default for Constants<T> {
    fn default() -> Self {
        Self {
            hbar: T::one(),
            mass: T::one(),
        }
    }
}

impl<T: Real> Constants<T> {
    pub fn new(hbar: T, mass: T) -> Result<Self> {
        if !(hbar.is_finite() && hbar > T::zero() && mass.is_finite() && mass > T::zero()) {
            return Err(Error::Config(format!(
                "hbar and mass must be positive and finite (hbar = {hbar}, mass = {mass})"
            )));
        }
        Ok(Self { hbar, mass })
    }

    /// The diffusion constant `ħ / 2m` that turns the osmotic acceleration into `-∇Q/m`.
    pub fn diffusion(&self) -> T {
        self.hbar / (T::lit(2.0) * self.mass)
    }

    /// `ħ / m`, the prefactor of the guiding equation.
    pub fn hbar_over_mass(&self) -> T {
        self.hbar / self.mass
    }

    /// Largest representable guiding speed on a grid with spacing `h`: `ħ k_Nyquist / m`.
    pub fn nyquist_speed(&self, h: T) -> T {
        self.hbar_over_mass() * T::PI() / h
    }

    /// Checks `2D² = ħ²/2m²` for a given `D`.
    pub fn matches_diffusion(&self, d: T) -> bool {
        let lhs = T::lit(2.0) * d * d;
        let rhs = self.hbar * self.hbar / (T::lit(2.0) * self.mass * self.mass);
        Float::abs(lhs - rhs) <= T::epsilon() * T::lit(8.0) * rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_diffusion_is_half() {
        let c = Constants::<f64>::default();
        assert_eq!(c.diffusion(), 0.5);
        assert!(c.matches_diffusion(0.5));
        let c = Constants::new(2.0, 3.0).unwrap();
        assert!(c.matches_diffusion(c.diffusion()));
        assert!(!c.matches_diffusion(1.0));
    }

    #[test]
    fn rejects_non_positive() {
        assert!(Constants::new(0.0, 1.0).is_err());
        assert!(Constants::new(1.0, -1.0).is_err());
    }
}

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::PhysicalParams;
use crate::I;

/// Roots of x² − γ²x + iγ²ω² = 0 and their principal square roots υ1, υ2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicRoots {
    pub gamma: f64,
    pub omega: f64,
    pub zeta: Complex64,
    pub upsilon1: Complex64,
    pub upsilon2: Complex64,
    /// υ1², υ2²
    pub x1: Complex64,
    pub x2: Complex64,
}

impl CharacteristicRoots {
    /// ζ = sqrt(γ⁴ − 4iγ²ω²), υ1,2 = sqrt((γ² ± ζ)/2). The small root is taken
    /// from Vieta (x2 = iγ²ω²/x1) so it keeps full relative precision when
    /// ω ≪ γ.
    pub fn from_frequency(gamma: f64, omega: f64) -> Result<Self> {
        super::check_gamma(gamma)?;
        let g2 = gamma * gamma;
        let zeta = (Complex64::new(g2 * g2, 0.0) - 4.0 * I * g2 * omega * omega).sqrt();
        let x1 = (g2 + zeta) / 2.0;
        let x2 = I * g2 * omega * omega / x1;
        Ok(CharacteristicRoots {
            gamma,
            omega,
            zeta,
            upsilon1: x1.sqrt(),
            upsilon2: x2.sqrt(),
            x1,
            x2,
        })
    }

    pub fn upsilon(&self, k: usize) -> Complex64 {
        [self.upsilon1, self.upsilon2][k]
    }

    pub fn square(&self, k: usize) -> Complex64 {
        [self.x1, self.x2][k]
    }

    /// υ1 + υ2 − γ without cancellation.
    pub fn asymptotic_combination(&self) -> Complex64 {
        self.upsilon2 - self.x2 / (self.upsilon1 + self.gamma)
    }
}

/// Roots for the kernel equation of `params` with exponential correlation γ.
/// The frequency entering the fourth-order equation is sqrt(2ħλ/m).
pub fn characteristic_roots(params: &PhysicalParams, gamma: f64) -> Result<CharacteristicRoots> {
    CharacteristicRoots::from_frequency(gamma, params.kernel_frequency())
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tag for the unit system a run is expressed in. Formulas never look at it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitMode {
    Si,
    Scaled,
}

impl std::str::FromStr for UnitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "si" => Ok(UnitMode::Si),
            "scaled" => Ok(UnitMode::Scaled),
            other => Err(Error::InvalidParameter(format!("unknown unit mode `{other}`"))),
        }
    }
}

/// Mass, ħ and collapse coupling λ. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    m: f64,
    hbar: f64,
    lambda: f64,
    unit_mode: UnitMode,
}

pub fn make_params(m: f64, hbar: f64, lambda: f64, unit_mode: UnitMode) -> Result<PhysicalParams> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {m}")));
    }
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be non-negative, got {lambda}")));
    }
    Ok(PhysicalParams { m, hbar, lambda, unit_mode })
}

impl PhysicalParams {
    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn unit_mode(&self) -> UnitMode {
        self.unit_mode
    }

    /// ω = 2·sqrt(ħλ/m).
    pub fn omega(&self) -> f64 {
        2.0 * (self.hbar * self.lambda / self.m).sqrt()
    }

    /// Frequency that actually enters the fourth-order kernel equation,
    /// sqrt(2ħλ/m) = ω/√2.
    pub fn kernel_frequency(&self) -> f64 {
        (2.0 * self.hbar * self.lambda / self.m).sqrt()
    }

    /// m/ħ, the ubiquitous prefactor of the kinetic term.
    pub fn m_over_hbar(&self) -> f64 {
        self.m / self.hbar
    }

    pub fn with_mass(&self, m: f64) -> Result<Self> {
        make_params(m, self.hbar, self.lambda, self.unit_mode)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        make_params(self.m, self.hbar, lambda, self.unit_mode)
    }
}

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::I;

/// ψ(x) ∝ exp(−αx² + βx + g).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub g: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStateRecord {
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub beta_re: f64,
    pub beta_im: f64,
    pub g_re: f64,
    pub g_im: f64,
}

impl From<&GaussianState> for GaussianStateRecord {
    fn from(s: &GaussianState) -> Self {
        GaussianStateRecord {
            alpha_re: s.alpha.re,
            alpha_im: s.alpha.im,
            beta_re: s.beta.re,
            beta_im: s.beta.im,
            g_re: s.g.re,
            g_im: s.g.im,
        }
    }
}

impl From<GaussianStateRecord> for GaussianState {
    fn from(r: GaussianStateRecord) -> Self {
        GaussianState {
            alpha: Complex64::new(r.alpha_re, r.alpha_im),
            beta: Complex64::new(r.beta_re, r.beta_im),
            g: Complex64::new(r.g_re, r.g_im),
        }
    }
}

impl GaussianState {
    pub fn new(alpha: Complex64, beta: Complex64, g: Complex64) -> Self {
        GaussianState { alpha, beta, g }
    }

    /// Normalized packet with position spread σ0, centre x0 and mean momentum p0.
    pub fn from_moments(sigma0: f64, x0: f64, p0: f64, hbar: f64) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma0 must be positive, got {sigma0}")));
        }
        let a = 1.0 / (4.0 * sigma0 * sigma0);
        let beta = Complex64::new(2.0 * a * x0, p0 / hbar);
        normalize(&GaussianState::new(Complex64::new(a, 0.0), beta, Complex64::new(0.0, 0.0)))
    }

    fn check(&self) -> Result<()> {
        if !(self.alpha.re > 0.0) || !self.alpha.re.is_finite() {
            return Err(Error::NonNormalizable(format!("Re(alpha) = {:e}", self.alpha.re)));
        }
        Ok(())
    }

    pub fn amplitude(&self, x: f64) -> Complex64 {
        (-self.alpha * x * x + self.beta * x + self.g).exp()
    }

    /// ln ∫|ψ|² dx.
    pub fn log_norm_sq(&self) -> Result<f64> {
        self.check()?;
        let a = self.alpha.re;
        let b = self.beta.re;
        Ok(2.0 * self.g.re + b * b / (2.0 * a) + 0.5 * (std::f64::consts::PI / (2.0 * a)).ln())
    }

    /// Multiplies ψ by e^{k}.
    pub fn scaled(&self, k: Complex64) -> Self {
        GaussianState { g: self.g + k, ..*self }
    }

    /// ψ ↦ (q·a + p·b + c)ψ for scalars a, b, c, returned as the coefficients
    /// (u, v) of (u·x + v)ψ.
    pub fn linear_action(&self, a: Complex64, b: Complex64, c: Complex64, hbar: f64) -> (Complex64, Complex64) {
        (a + 2.0 * I * hbar * self.alpha * b, c - I * hbar * self.beta * b)
    }
}

/// Adjusts Re(g) so that ∫|ψ|² = 1; Im(g) is left alone.
pub fn normalize(state: &GaussianState) -> Result<GaussianState> {
    let log_norm = state.log_norm_sq()?;
    let mut out = *state;
    out.g.re -= 0.5 * log_norm;
    Ok(out)
}

pub fn spread_position(state: &GaussianState) -> Result<f64> {
    state.check()?;
    Ok(0.5 / state.alpha.re.sqrt())
}

pub fn mean_position(state: &GaussianState) -> Result<f64> {
    state.check()?;
    Ok(state.beta.re / (2.0 * state.alpha.re))
}

/// ⟨p⟩ = ħ(Im β − 2 Im α ⟨q⟩).
pub fn mean_momentum(state: &GaussianState, hbar: f64) -> Result<f64> {
    let q = mean_position(state)?;
    Ok(hbar * (state.beta.im - 2.0 * state.alpha.im * q))
}

/// σ_p = ħ|α|/sqrt(Re α).
pub fn spread_momentum(state: &GaussianState, hbar: f64) -> Result<f64> {
    state.check()?;
    Ok(hbar * state.alpha.norm() / state.alpha.re.sqrt())
}

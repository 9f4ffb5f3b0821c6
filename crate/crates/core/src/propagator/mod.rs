//! Green's-function coefficients, Gaussian propagation and the quantities
//! read off the propagated states.

mod ansatz;
mod state;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{characteristic_roots, ExponentialF, KernelKind, KernelSolution, MarkovF};
use crate::noise::NoisePath;
use crate::params::PhysicalParams;
use crate::{c, I};

pub use ansatz::{functional_derivative_coeffs, FunctionalDerivativeCoeffs};
pub use state::{
    mean_momentum, mean_position, normalize, spread_momentum, spread_position, GaussianState,
    GaussianStateRecord,
};

/// G(x, t; x0, 0) ∝ exp[−A(x0² + x²) + B x0 x + C x0 + D x + E].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreensCoefficients {
    pub t: f64,
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    pub e: Complex64,
    /// 2A − B computed from f'(0) − f'(t) directly; A and B nearly cancel when
    /// m/ħ is large.
    pub two_a_minus_b: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct GreensRecord {
    pub t: f64,
    pub A_re: f64,
    pub A_im: f64,
    pub B_re: f64,
    pub B_im: f64,
    pub C_re: f64,
    pub C_im: f64,
    pub D_re: f64,
    pub D_im: f64,
    pub E_re: f64,
    pub E_im: f64,
}

impl From<&GreensCoefficients> for GreensRecord {
    fn from(g: &GreensCoefficients) -> Self {
        GreensRecord {
            t: g.t,
            A_re: g.a.re,
            A_im: g.a.im,
            B_re: g.b.re,
            B_im: g.b.im,
            C_re: g.c.re,
            C_im: g.c.im,
            D_re: g.d.re,
            D_im: g.d.im,
            E_re: g.e.re,
            E_im: g.e.im,
        }
    }
}

impl GreensCoefficients {
    /// Noise-free coefficients from the endpoint slopes of f.
    pub fn deterministic(t: f64, params: &PhysicalParams, d_start: Complex64, d_end: Complex64, d_gap: Complex64) -> Self {
        let k = I * params.m_over_hbar();
        GreensCoefficients {
            t,
            a: 0.5 * k * d_start,
            b: k * d_end,
            c: c(0.0),
            d: c(0.0),
            e: c(0.0),
            two_a_minus_b: k * d_gap,
        }
    }

    pub fn as_array(&self) -> [Complex64; 5] {
        [self.a, self.b, self.c, self.d, self.e]
    }

    pub fn record(&self) -> GreensRecord {
        GreensRecord::from(self)
    }
}

pub(crate) fn trapezoid(weights: &[f64], f: impl Fn(usize) -> Complex64) -> Complex64 {
    weights.iter().enumerate().map(|(k, w)| f(k) * *w).sum()
}

pub fn greens_coefficients(
    f: &KernelSolution,
    h: &KernelSolution,
    noise: &NoisePath,
    params: &PhysicalParams,
) -> Result<GreensCoefficients> {
    if f.kind != KernelKind::F || h.kind != KernelKind::H {
        return Err(Error::InvalidInput("expected an F kernel and an H kernel".into()));
    }
    if !f.grid.same_as(&h.grid) || !f.grid.same_as(noise.grid()) {
        return Err(Error::InvalidInput("kernels and noise must share one grid".into()));
    }
    let t = f.grid.horizon();
    let mut g = GreensCoefficients::deterministic(t, params, f.d_start, f.d_end, f.d_gap);
    let k = I * params.m_over_hbar();
    let tw = f.grid.trapezoid_weights();
    let w = noise.values();
    let n = w.len();
    let amp = 0.5 * params.lambda().sqrt();
    let wf = trapezoid(&tw, |j| f.values[j] * w[j]);
    let wf_rev = trapezoid(&tw, |j| f.values[n - 1 - j] * w[j]);
    let wh = trapezoid(&tw, |j| h.values[j] * w[j]);
    g.c = -0.5 * k * h.d_start + amp * wf;
    g.d = 0.5 * k * h.d_end + amp * wf_rev;
    g.e = amp * wh;
    Ok(g)
}

/// Applies the Green's function to ψ0 and integrates x0 out, without
/// renormalizing. Needs Re(α0 + A) > 0.
pub fn propagate_raw(state0: &GaussianState, g: &GreensCoefficients) -> Result<GaussianState> {
    let s = state0.alpha + g.a;
    if !(s.re > 0.0) {
        return Err(Error::NonNormalizable(format!(
            "Re(alpha0 + A) = {:e} at t = {:e}",
            s.re, g.t
        )));
    }
    let two_a_plus_b = 2.0 * g.a + g.b;
    let alpha = (4.0 * g.a * state0.alpha + g.two_a_minus_b * two_a_plus_b) / (4.0 * s);
    let src = g.c + state0.beta;
    let beta = g.d + g.b * src / (2.0 * s);
    let gg = state0.g + g.e + src * src / (4.0 * s) + 0.5 * (std::f64::consts::PI / s).ln();
    Ok(GaussianState::new(alpha, beta, gg))
}

/// Propagates and renormalizes.
pub fn propagate_gaussian(state0: &GaussianState, g: &GreensCoefficients) -> Result<GaussianState> {
    normalize(&propagate_raw(state0, g)?)
}

/// Correlation model of the driving noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// (γ/2)e^{−γ|τ|}
    Exponential(f64),
    /// The γ → ∞ limit, δ-correlated.
    White,
}

impl NoiseModel {
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        if gamma == f64::INFINITY {
            Ok(NoiseModel::White)
        } else if gamma.is_finite() && gamma > 0.0 {
            Ok(NoiseModel::Exponential(gamma))
        } else {
            Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")))
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            NoiseModel::Exponential(g) => *g,
            NoiseModel::White => f64::INFINITY,
        }
    }

    /// (f'(0), f'(t), f'(0) − f'(t)) from the closed forms.
    pub fn f_slopes(&self, params: &PhysicalParams, t: f64) -> Result<(Complex64, Complex64, Complex64)> {
        match self {
            NoiseModel::Exponential(g) => Ok(ExponentialF::new(params, *g, t)?.endpoint_slopes()),
            NoiseModel::White => Ok(MarkovF::new(params, t)?.endpoint_slopes()),
        }
    }

    pub fn deterministic_coefficients(&self, params: &PhysicalParams, t: f64) -> Result<GreensCoefficients> {
        let (d0, dt, gap) = self.f_slopes(params, t)?;
        Ok(GreensCoefficients::deterministic(t, params, d0, dt, gap))
    }
}

/// −(im/2ħ)(υ1 + υ2 − γ) without any positivity check.
pub fn alpha_inf_value(params: &PhysicalParams, gamma: f64) -> Result<Complex64> {
    let comb = match NoiseModel::from_gamma(gamma)? {
        NoiseModel::Exponential(g) => characteristic_roots(params, g)?.asymptotic_combination(),
        NoiseModel::White => (2.0 * I * params.hbar() * params.lambda() / params.m()).sqrt(),
    };
    Ok(-0.5 * I * params.m_over_hbar() * comb)
}

/// Long-time limit of α_t; γ = ∞ selects the white-noise value.
pub fn asymptotic_alpha(params: &PhysicalParams, gamma: f64) -> Result<Complex64> {
    let a = alpha_inf_value(params, gamma)?;
    if !(a.re > 0.0) {
        return Err(Error::NoFiniteAsymptote(a.re));
    }
    Ok(a)
}

/// Final position spread 1/(2·sqrt(Re α∞)).
pub fn sigma_inf(params: &PhysicalParams, gamma: f64) -> Result<f64> {
    Ok(0.5 / asymptotic_alpha(params, gamma)?.re.sqrt())
}

/// Noise-free σ(t) at each requested time (the spread does not depend on the noise).
pub fn spread_curve(params: &PhysicalParams, gamma: f64, state0: &GaussianState, times: &[f64]) -> Result<Vec<f64>> {
    let model = NoiseModel::from_gamma(gamma)?;
    times
        .iter()
        .map(|&t| {
            let g = model.deterministic_coefficients(params, t)?;
            spread_position(&propagate_raw(state0, &g)?)
        })
        .collect()
}

/// Free-particle spread σ0·sqrt(1 + (ħt/(2mσ0²))²).
pub fn free_spread(params: &PhysicalParams, sigma0: f64, t: f64) -> f64 {
    let r = params.hbar() * t / (2.0 * params.m() * sigma0 * sigma0);
    sigma0 * (1.0 + r * r).sqrt()
}

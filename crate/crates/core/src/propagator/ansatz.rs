use num_complex::Complex64;

use super::trapezoid;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{KernelKind, KernelSolution};
use crate::noise::NoisePath;
use crate::params::PhysicalParams;
use crate::I;

/// Coefficients of δψ_t/δw_s = (q·a(s) + p·b(s) + c(s))ψ_t.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDerivativeCoeffs {
    pub grid: TimeGrid,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub c: Vec<Complex64>,
    /// f'(0)/f'(t); a(0) = √λ·ratio and a(t) = √λ.
    pub slope_ratio: Complex64,
}

/// a(s) = √λ[f(t−s) + (f'(0)/f'(t)) f(s)]
/// b(s) = √λ f(s)/(m f'(t))
/// c(s) = √λ[h(s) − f(s)/(2f'(t)) · (h'(t) − (i√λħ/m)∫₀ᵗ w_l f(t−l) dl)]
pub fn functional_derivative_coeffs(
    f: &KernelSolution,
    h: &KernelSolution,
    noise: &NoisePath,
    params: &PhysicalParams,
) -> Result<FunctionalDerivativeCoeffs> {
    if f.kind != KernelKind::F || h.kind != KernelKind::H {
        return Err(Error::InvalidInput("expected an F kernel and an H kernel".into()));
    }
    if !f.grid.same_as(&h.grid) || !f.grid.same_as(noise.grid()) {
        return Err(Error::InvalidInput("kernels and noise must share one grid".into()));
    }
    if f.d_end.norm() < 1e-12 * f.d_start.norm() || f.d_end.norm() == 0.0 {
        return Err(Error::DegenerateKernel(format!(
            "f'(t) = {:e} is negligible against f'(0) = {:e}",
            f.d_end.norm(),
            f.d_start.norm()
        )));
    }
    let n = f.values.len();
    let sl = params.lambda().sqrt();
    let ratio = f.d_start / f.d_end;
    let w = noise.values();
    let tw = f.grid.trapezoid_weights();
    let wf_rev = trapezoid(&tw, |j| f.values[n - 1 - j] * w[j]);
    let bracket = h.d_end - I * sl * params.hbar() / params.m() * wf_rev;
    let a = (0..n).map(|j| sl * (f.values[n - 1 - j] + ratio * f.values[j])).collect();
    let b = (0..n).map(|j| sl * f.values[j] / (params.m() * f.d_end)).collect();
    let c = (0..n)
        .map(|j| sl * (h.values[j] - f.values[j] / (2.0 * f.d_end) * bracket))
        .collect();
    Ok(FunctionalDerivativeCoeffs { grid: f.grid, a, b, c, slope_ratio: ratio })
}

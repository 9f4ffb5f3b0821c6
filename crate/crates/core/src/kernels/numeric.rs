use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{check_horizon, KernelKind, KernelSolution};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::DenseLu;
use crate::noise::{kernel_eval, CorrelationKernel, NoisePath};
use crate::params::PhysicalParams;
use crate::special::{phi1, psi};
use crate::{c, I};

/// Quadrature for the memory integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    /// Trapezoid rule on the grid values.
    #[default]
    Trapezoid,
    /// Exact integral of the exponential correlation against the piecewise-linear
    /// interpolant. Stays accurate when γΔ is not small; exponential kernels only.
    ProductHat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NumericOptions {
    pub quadrature: Quadrature,
}

fn memory_weights(kernel: &CorrelationKernel, grid: &TimeGrid, quad: Quadrature) -> Result<DMatrix<f64>> {
    let n = grid.len();
    let d = grid.spacing();
    match quad {
        Quadrature::Trapezoid => {
            let tw = grid.trapezoid_weights();
            let lags: Vec<f64> = (0..n).map(|k| kernel_eval(kernel, k as f64 * d)).collect::<Result<_>>()?;
            Ok(DMatrix::from_fn(n, n, |k, j| lags[k.abs_diff(j)] * tw[j]))
        }
        Quadrature::ProductHat => {
            let gamma = kernel.gamma().ok_or_else(|| {
                Error::InvalidInput("product-hat quadrature needs an exponential kernel".into())
            })?;
            let z = c(gamma * d);
            let near = psi(z).re * d;
            let far = (phi1(z).re - psi(z).re) * d;
            let amp = 0.5 * gamma;
            let last = n - 1;
            Ok(DMatrix::from_fn(n, n, |k, j| {
                if k == j {
                    let halves = if j == 0 || j == last { 1.0 } else { 2.0 };
                    return amp * halves * far;
                }
                let m = k.abs_diff(j) as f64;
                let mut w = amp * (-gamma * (m - 1.0) * d).exp() * near;
                let far_side_exists = !((j == 0 && k > 0) || (j == last && k < last));
                if far_side_exists {
                    w += amp * (-gamma * m * d).exp() * far;
                }
                w
            }))
        }
    }
}

const REFINEMENT_STEPS: usize = 2;

enum Factor {
    /// λ = 0: the memory term drops out and the system is tridiagonal.
    Tridiagonal,
    Dense(DenseLu),
}

/// Discretized boundary-value problem on one grid, factored once and reusable
/// for f and for any number of noise right-hand sides.
pub struct KernelBvp {
    grid: TimeGrid,
    kin: Complex64,
    lambda: f64,
    weights: DMatrix<f64>,
    factor: Factor,
}

impl KernelBvp {
    pub fn new(kernel: &CorrelationKernel, params: &PhysicalParams, grid: &TimeGrid, opts: NumericOptions) -> Result<Self> {
        let n = grid.len();
        let d = grid.spacing();
        let kin = I * params.m() / (2.0 * params.hbar());
        let lambda = params.lambda();
        let weights = memory_weights(kernel, grid, opts.quadrature)?;
        let factor = if lambda == 0.0 {
            Factor::Tridiagonal
        } else {
            let diag = kin / (d * d);
            let mut m = DMatrix::from_fn(n, n, |k, j| {
                if k == 0 || k == n - 1 {
                    c(0.0)
                } else {
                    c(lambda * weights[(k, j)])
                }
            });
            m[(0, 0)] = diag;
            m[(n - 1, n - 1)] = diag;
            for k in 1..n - 1 {
                m[(k, k - 1)] += diag;
                m[(k, k)] -= 2.0 * diag;
                m[(k, k + 1)] += diag;
            }
            Factor::Dense(DenseLu::new(m)?)
        };
        Ok(KernelBvp { grid: *grid, kin, lambda, weights, factor })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Pivot-ratio condition estimate (1 for the tridiagonal case).
    pub fn condition(&self) -> f64 {
        match &self.factor {
            Factor::Tridiagonal => 1.0,
            Factor::Dense(lu) => lu.condition(),
        }
    }

    fn solve(&self, start: Complex64, end: Complex64, interior: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.grid.len();
        let d = self.grid.spacing();
        let diag = self.kin / (d * d);
        match &self.factor {
            Factor::Dense(lu) => {
                let mut rhs = interior.to_vec();
                rhs[0] = diag * start;
                rhs[n - 1] = diag * end;
                let mut x = lu.solve(&rhs)?;
                // Refinement: the stencil terms are ~1/Δ² larger than their
                // difference, so a plain LU solve leaves a visible residual.
                for _ in 0..REFINEMENT_STEPS {
                    let ax = self.apply(&x);
                    let r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                    let dx = lu.solve(&r)?;
                    for (xi, di) in x.iter_mut().zip(&dx) {
                        *xi += di;
                    }
                }
                Ok(x)
            }
            Factor::Tridiagonal => {
                // Thomas sweep on diag·(y[k−1] − 2y[k] + y[k+1]) = r[k].
                let mut y = vec![c(0.0); n];
                y[0] = start;
                y[n - 1] = end;
                let m = n - 2;
                let mut cp = vec![c(0.0); m];
                let mut dp = vec![c(0.0); m];
                for i in 0..m {
                    let k = i + 1;
                    let mut r = interior[k] / diag;
                    if k == 1 {
                        r -= start;
                    }
                    if k == n - 2 {
                        r -= end;
                    }
                    let denom = if i == 0 { c(-2.0) } else { c(-2.0) - cp[i - 1] };
                    cp[i] = c(1.0) / denom;
                    dp[i] = if i == 0 { r / denom } else { (r - dp[i - 1]) / denom };
                }
                for i in (0..m).rev() {
                    let next = if i + 1 < m { y[i + 2] } else { c(0.0) };
                    y[i + 1] = if i + 1 < m { dp[i] - cp[i] * next } else { dp[i] };
                }
                Ok(y)
            }
        }
    }

    /// The dense system matrix applied to `x` (boundary rows included).
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.len();
        let d = self.grid.spacing();
        let diag = self.kin / (d * d);
        let mut y = vec![c(0.0); n];
        y[0] = diag * x[0];
        y[n - 1] = diag * x[n - 1];
        for k in 1..n - 1 {
            let memory: Complex64 = (0..n).map(|j| x[j] * self.weights[(k, j)]).sum();
            y[k] = diag * (x[k - 1] - 2.0 * x[k] + x[k + 1]) + self.lambda * memory;
        }
        y
    }

    fn package(&self, values: Vec<Complex64>, kind: KernelKind) -> Result<KernelSolution> {
        let n = values.len();
        let d = self.grid.spacing();
        let d0 = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * d);
        let dt = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * d);
        KernelSolution::new(self.grid, values, d0, dt, d0 - dt, kind)
    }

    pub fn solve_f(&self) -> Result<KernelSolution> {
        let zeros = vec![c(0.0); self.grid.len()];
        let values = self.solve(c(1.0), c(0.0), &zeros)?;
        self.package(values, KernelKind::F)
    }

    pub fn solve_h(&self, noise: &NoisePath) -> Result<KernelSolution> {
        if !noise.grid().same_as(&self.grid) {
            return Err(Error::InvalidInput("noise grid differs from solver grid".into()));
        }
        let rhs = self.rhs(Some(noise));
        let values = self.solve(c(0.0), c(0.0), &rhs)?;
        self.package(values, KernelKind::H)
    }

    fn rhs(&self, noise: Option<&NoisePath>) -> Vec<Complex64> {
        let n = self.grid.len();
        match noise {
            Some(w) => {
                let amp = 0.5 * self.lambda.sqrt();
                (0..n).map(|k| c(amp * w.values()[k])).collect()
            }
            None => vec![c(0.0); n],
        }
    }

    /// max over interior nodes of |kin·D²y + λ·Q[y] − rhs|, divided by the
    /// largest of the three terms anywhere on the interior.
    pub fn residual(&self, values: &[Complex64], noise: Option<&NoisePath>) -> Result<f64> {
        let n = self.grid.len();
        if values.len() != n {
            return Err(Error::InvalidInput("solution length differs from grid".into()));
        }
        let d = self.grid.spacing();
        let rhs = self.rhs(noise);
        let mut worst = 0.0f64;
        // a solution that is exactly linear has every term at roundoff level
        let vmax = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut scale = self.kin.norm() * vmax / (self.grid.horizon() * self.grid.horizon());
        for k in 1..n - 1 {
            let kinetic = self.kin * (values[k - 1] - 2.0 * values[k] + values[k + 1]) / (d * d);
            let memory: Complex64 = self.lambda
                * (0..n).map(|j| values[j] * self.weights[(k, j)]).sum::<Complex64>();
            worst = worst.max((kinetic + memory - rhs[k]).norm());
            scale = scale.max(kinetic.norm()).max(memory.norm()).max(rhs[k].norm());
        }
        Ok(if scale > 0.0 { worst / scale } else { worst })
    }
}

pub fn solve_f_numeric(kernel: &CorrelationKernel, t: f64, params: &PhysicalParams, grid: &TimeGrid) -> Result<KernelSolution> {
    solve_f_numeric_with(kernel, t, params, grid, NumericOptions::default())
}

pub fn solve_f_numeric_with(
    kernel: &CorrelationKernel,
    t: f64,
    params: &PhysicalParams,
    grid: &TimeGrid,
    opts: NumericOptions,
) -> Result<KernelSolution> {
    check_horizon(t, grid)?;
    KernelBvp::new(kernel, params, grid, opts)?.solve_f()
}

pub fn solve_h_numeric(
    kernel: &CorrelationKernel,
    t: f64,
    params: &PhysicalParams,
    noise: &NoisePath,
    grid: &TimeGrid,
) -> Result<KernelSolution> {
    solve_h_numeric_with(kernel, t, params, noise, grid, NumericOptions::default())
}

pub fn solve_h_numeric_with(
    kernel: &CorrelationKernel,
    t: f64,
    params: &PhysicalParams,
    noise: &NoisePath,
    grid: &TimeGrid,
    opts: NumericOptions,
) -> Result<KernelSolution> {
    check_horizon(t, grid)?;
    KernelBvp::new(kernel, params, grid, opts)?.solve_h(noise)
}

/// Residual of the discretized equation (trapezoid memory term); `noise` is
/// `None` for the homogeneous equation.
pub fn kernel_residual(
    solution: &KernelSolution,
    kernel: &CorrelationKernel,
    params: &PhysicalParams,
    noise: Option<&NoisePath>,
) -> Result<f64> {
    kernel_residual_with(solution, kernel, params, noise, NumericOptions::default())
}

pub fn kernel_residual_with(
    solution: &KernelSolution,
    kernel: &CorrelationKernel,
    params: &PhysicalParams,
    noise: Option<&NoisePath>,
    opts: NumericOptions,
) -> Result<f64> {
    let weights = memory_weights(kernel, &solution.grid, opts.quadrature)?;
    let bvp = KernelBvp {
        grid: solution.grid,
        kin: I * params.m() / (2.0 * params.hbar()),
        lambda: params.lambda(),
        weights,
        factor: Factor::Tridiagonal,
    };
    bvp.residual(&solution.values, noise)
}

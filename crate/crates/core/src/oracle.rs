//! Time-sliced path integral of the quadratic action, integrated exactly.
//!
//! With q_0 = x0, q_N = x and ε = t/N the exponent is
//! `Σ (im/2ħε)(q_{j+1} − q_j)² + √λ Σ b_j q_j − λ Σ_{j,r} ε_j ε_r α(s_j − s_r) q_j q_r`
//! where b_j is the noise projected onto the hat function of node j and ε_j are
//! trapezoid weights. Integrating out q_1..q_{N−1} leaves
//! `log G = s0(x0, x) − ¼ Jᵀ M⁻¹ J` up to a constant that does not depend on
//! the noise or the endpoints.

use nalgebra::{DMatrix, Matrix6, Vector6};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseLu;
use crate::noise::{kernel_eval, CorrelationKernel, NoisePath};
use crate::params::PhysicalParams;
use crate::propagator::{GreensCoefficients, GreensRecord};
use crate::{c, I};

/// Default probe points (x0, x).
pub const PROBES: [(f64, f64); 6] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 0.0), (0.0, 2.0)];

/// Extra point used only to measure how well the quadratic fit reproduces log G.
pub const CHECK_PROBE: (f64, f64) = (1.5, -0.5);

#[derive(Debug, Clone)]
pub struct DiscretizedAction {
    pub slices: usize,
    pub epsilon: f64,
    /// Quadratic form over interior nodes, exponent +qᵀMq.
    pub m: DMatrix<Complex64>,
    /// Noise source on interior nodes.
    pub v: Vec<Complex64>,
    /// ∂J/∂x0 and ∂J/∂x on interior nodes.
    pub couple_start: Vec<Complex64>,
    pub couple_end: Vec<Complex64>,
    /// s0 = q00·x0² + qtt·x² + q0t·x0·x + l0·x0 + lt·x.
    pub q00: Complex64,
    pub qtt: Complex64,
    pub q0t: Complex64,
    pub l0: Complex64,
    pub lt: Complex64,
}

/// ∫ φ_j(s) w(s) ds for every oracle hat φ_j, exact for the piecewise-linear
/// noise (Simpson on the merged breakpoints).
fn project_noise(noise: &NoisePath, t: f64, slices: usize) -> Vec<f64> {
    let eps = t / slices as f64;
    let mut cuts: Vec<f64> = (0..=slices).map(|j| j as f64 * eps).collect();
    cuts.extend(noise.grid().nodes().into_iter().filter(|&s| s > 0.0 && s < t));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t);
    let hat = |j: usize, s: f64| (1.0 - ((s - j as f64 * eps) / eps).abs()).max(0.0);
    let mut out = vec![0.0; slices + 1];
    for pair in cuts.windows(2) {
        let (l, r) = (pair[0], pair[1]);
        let mid = 0.5 * (l + r);
        let j = ((mid / eps).floor() as usize).min(slices - 1);
        let wl = noise.interpolate(l);
        let wm = noise.interpolate(mid);
        let wr = noise.interpolate(r);
        for jj in [j, j + 1] {
            let integral = (r - l) / 6.0 * (hat(jj, l) * wl + 4.0 * hat(jj, mid) * wm + hat(jj, r) * wr);
            out[jj] += integral;
        }
    }
    out
}

pub fn assemble_action(
    params: &PhysicalParams,
    kernel: &CorrelationKernel,
    noise: &NoisePath,
    t: f64,
    slices: usize,
) -> Result<DiscretizedAction> {
    if slices < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 slices, got {slices}")));
    }
    if (noise.grid().horizon() - t).abs() > 1e-12 * t {
        return Err(Error::InvalidInput("noise horizon differs from t".into()));
    }
    let n = slices;
    let eps = t / n as f64;
    let kin = I * params.m() / (2.0 * params.hbar() * eps);
    let lam = params.lambda();
    let weight = |j: usize| if j == 0 || j == n { 0.5 * eps } else { eps };
    let lags: Vec<f64> = (0..=n).map(|k| kernel_eval(kernel, k as f64 * eps)).collect::<Result<_>>()?;
    let mem = |j: usize, r: usize| c(lam * weight(j) * weight(r) * lags[j.abs_diff(r)]);

    let dim = n - 1;
    // interior node j ↔ row j − 1
    let mut m = DMatrix::from_fn(dim, dim, |a, b| -mem(a + 1, b + 1));
    for a in 0..dim {
        m[(a, a)] += 2.0 * kin;
        if a + 1 < dim {
            m[(a, a + 1)] -= kin;
            m[(a + 1, a)] -= kin;
        }
    }
    let proj = project_noise(noise, t, n);
    let sl = lam.sqrt();
    let v: Vec<Complex64> = (1..n).map(|j| c(sl * proj[j])).collect();
    let mut couple_start: Vec<Complex64> = (1..n).map(|j| -2.0 * mem(0, j)).collect();
    let mut couple_end: Vec<Complex64> = (1..n).map(|j| -2.0 * mem(n, j)).collect();
    couple_start[0] -= 2.0 * kin;
    couple_end[dim - 1] -= 2.0 * kin;
    Ok(DiscretizedAction {
        slices: n,
        epsilon: eps,
        m,
        v,
        couple_start,
        couple_end,
        q00: kin - mem(0, 0),
        qtt: kin - mem(n, n),
        q0t: -2.0 * mem(0, n),
        l0: c(sl * proj[0]),
        lt: c(sl * proj[n]),
    })
}

/// Oracle output with diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub coefficients: GreensRecord,
    /// |fit − direct| / |direct| at the check probe.
    pub probe_residual: f64,
    /// |coeff(x0²) − coeff(x²)|, zero for a time-symmetric discretization.
    pub asymmetry: f64,
    pub condition: f64,
    pub log_abs_det: f64,
    #[serde(skip)]
    pub greens: Option<GreensCoefficients>,
}

struct Evaluator {
    action: DiscretizedAction,
    lu: DenseLu,
}

impl Evaluator {
    fn new(action: DiscretizedAction) -> Result<Self> {
        let lu = DenseLu::new(action.m.clone()).map_err(|e| match e {
            Error::SolverFailure { condition } => Error::OracleFailure {
                reason: "quadratic form is numerically singular".into(),
                condition,
            },
            other => other,
        })?;
        Ok(Evaluator { action, lu })
    }

    fn log_g(&self, x0: f64, x: f64) -> Result<Complex64> {
        let a = &self.action;
        let j: Vec<Complex64> = (0..a.v.len())
            .map(|k| a.v[k] + a.couple_start[k] * x0 + a.couple_end[k] * x)
            .collect();
        let z = self.lu.solve(&j)?;
        let quad: Complex64 = j.iter().zip(&z).map(|(p, q)| p * q).sum();
        let s0 = a.q00 * x0 * x0 + a.qtt * x * x + a.q0t * x0 * x + a.l0 * x0 + a.lt * x;
        Ok(s0 - 0.25 * quad)
    }
}

fn monomials(x0: f64, x: f64) -> [f64; 6] {
    [1.0, x0, x, x0 * x0, x * x, x0 * x]
}

/// Fits k0 + k1 x0 + k2 x + k3 x0² + k4 x² + k5 x0 x through six probes.
fn fit_quadratic(probes: &[(f64, f64); 6], values: &[Complex64; 6]) -> Result<[Complex64; 6]> {
    let design = Matrix6::from_fn(|r, col| monomials(probes[r].0, probes[r].1)[col]);
    let lu = design.lu();
    let re = Vector6::from_fn(|r, _| values[r].re);
    let im = Vector6::from_fn(|r, _| values[r].im);
    let (kr, ki) = match (lu.solve(&re), lu.solve(&im)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::OracleFailure {
                reason: "probe points do not determine a quadratic".into(),
                condition: f64::INFINITY,
            })
        }
    };
    Ok(std::array::from_fn(|k| Complex64::new(kr[k], ki[k])))
}

pub fn polygonal_report_with_probes(
    params: &PhysicalParams,
    kernel: &CorrelationKernel,
    noise: &NoisePath,
    t: f64,
    slices: usize,
    probes: &[(f64, f64); 6],
) -> Result<OracleReport> {
    let eval = Evaluator::new(assemble_action(params, kernel, noise, t, slices)?)?;
    let mut values = [c(0.0); 6];
    for (k, (x0, x)) in probes.iter().enumerate() {
        values[k] = eval.log_g(*x0, *x)?;
    }
    let k = fit_quadratic(probes, &values)?;
    let (cx0, cx) = CHECK_PROBE;
    let direct = eval.log_g(cx0, cx)?;
    let fitted: Complex64 = monomials(cx0, cx).iter().zip(&k).map(|(m, kk)| kk * *m).sum();
    let probe_residual = (fitted - direct).norm() / direct.norm().max(f64::MIN_POSITIVE);
    let a = -0.5 * (k[3] + k[4]);
    let g = GreensCoefficients {
        t,
        a,
        b: k[5],
        c: k[1],
        d: k[2],
        e: k[0],
        two_a_minus_b: -(k[3] + k[4]) - k[5],
    };
    Ok(OracleReport {
        n: slices,
        coefficients: g.record(),
        probe_residual,
        asymmetry: (k[3] - k[4]).norm(),
        condition: eval.lu.condition(),
        log_abs_det: eval.lu.log_abs_det(),
        greens: Some(g),
    })
}

pub fn polygonal_report(
    params: &PhysicalParams,
    kernel: &CorrelationKernel,
    noise: &NoisePath,
    t: f64,
    slices: usize,
) -> Result<OracleReport> {
    polygonal_report_with_probes(params, kernel, noise, t, slices, &PROBES)
}

pub fn polygonal_greens(
    params: &PhysicalParams,
    kernel: &CorrelationKernel,
    noise: &NoisePath,
    t: f64,
    slices: usize,
) -> Result<GreensCoefficients> {
    Ok(polygonal_report(params, kernel, noise, t, slices)?.greens.expect("set by constructor"))
}

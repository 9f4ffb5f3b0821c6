use num_complex::Complex64;

use super::{check_gamma, check_horizon, CharacteristicRoots, KernelKind, KernelSolution};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::noise::NoisePath;
use crate::params::PhysicalParams;
use crate::special::{cosh_ratio, psi, phi1, sinh_ratio, v_coth, v_tanh, CausalStep};
use crate::{c, I};

/// Homogeneous solutions of y'''' − γ²y'' + iγ²ω²y = 0 written about the
/// midpoint x = s − t/2:
/// `y = Σ_k p_k cosh(υ_k x)/cosh(υ_k t/2) + q_k sinh(υ_k x)/sinh(υ_k t/2)`.
/// Every basis function is bounded by one on [0, t], whatever γt is.
#[derive(Debug, Clone, Copy)]
pub struct HomogeneousBasis {
    pub roots: CharacteristicRoots,
    pub t: f64,
    half: f64,
    /// υ_k tanh(υ_k t/2) and υ_k coth(υ_k t/2)
    vt: [Complex64; 2],
    vc: [Complex64; 2],
    even: [Complex64; 2],
    odd: [Complex64; 2],
}

impl HomogeneousBasis {
    pub fn new(roots: CharacteristicRoots, t: f64) -> Result<Self> {
        let half = 0.5 * t;
        if !(half > 0.0) || !(roots.upsilon1.norm() * half).is_normal() {
            return Err(Error::DegenerateHorizon(format!(
                "hyperbolic arguments vanish at t = {t:e}"
            )));
        }
        let g = roots.gamma;
        let mut vt = [c(0.0); 2];
        let mut vc = [c(0.0); 2];
        let mut even = [c(0.0); 2];
        let mut odd = [c(0.0); 2];
        for k in 0..2 {
            let v = roots.upsilon(k);
            vt[k] = v_tanh(v, half);
            vc[k] = v_coth(v, half);
            even[k] = roots.square(k) * (vt[k] + g);
            odd[k] = roots.square(k) * (vc[k] + g);
        }
        Ok(HomogeneousBasis { roots, t, half, vt, vc, even, odd })
    }

    /// Coefficients (p, q) meeting y(0)=a0, y(t)=at,
    /// (y''' − γy'')(0) = b0 and (y''' + γy'')(t) = bt.
    pub fn fit(&self, a0: Complex64, at: Complex64, b0: Complex64, bt: Complex64) -> ([Complex64; 2], [Complex64; 2]) {
        let e0 = (a0 + at) / 2.0;
        let e3 = (b0 - bt) / 2.0;
        let o0 = (a0 - at) / 2.0;
        let o3 = (b0 + bt) / 2.0;
        let [e1, e2] = self.even;
        let [o1, o2] = self.odd;
        let p1 = (-e3 - e2 * e0) / (e1 - e2);
        let p2 = e0 - p1;
        let q1 = (o3 + o2 * o0) / (o1 - o2);
        let q2 = -o0 - q1;
        ([p1, p2], [q1, q2])
    }

    pub fn value(&self, p: &[Complex64; 2], q: &[Complex64; 2], s: f64) -> Complex64 {
        let x = (s - self.half).clamp(-self.half, self.half);
        (0..2)
            .map(|k| {
                let v = self.roots.upsilon(k);
                p[k] * cosh_ratio(v, x, self.half) + q[k] * sinh_ratio(v, x, self.half)
            })
            .sum()
    }

    /// n-th derivative at s.
    pub fn derivative(&self, p: &[Complex64; 2], q: &[Complex64; 2], s: f64, n: u32) -> Complex64 {
        let x = (s - self.half).clamp(-self.half, self.half);
        (0..2)
            .map(|k| {
                let v = self.roots.upsilon(k);
                let ch = cosh_ratio(v, x, self.half);
                let sh = sinh_ratio(v, x, self.half);
                let vn = v.powu(n & !1);
                if n % 2 == 0 {
                    vn * (p[k] * ch + q[k] * sh)
                } else {
                    vn * (p[k] * self.vt[k] * sh + q[k] * self.vc[k] * ch)
                }
            })
            .sum()
    }

    /// (y'(0), y'(t), y'(0) − y'(t)).
    pub fn endpoint_slopes(&self, p: &[Complex64; 2], q: &[Complex64; 2]) -> (Complex64, Complex64, Complex64) {
        let mut d0 = c(0.0);
        let mut dt = c(0.0);
        let mut gap = c(0.0);
        for k in 0..2 {
            d0 += -p[k] * self.vt[k] + q[k] * self.vc[k];
            dt += p[k] * self.vt[k] + q[k] * self.vc[k];
            gap += -2.0 * p[k] * self.vt[k];
        }
        (d0, dt, gap)
    }
}

/// Closed-form f for the exponential correlation, evaluable anywhere on [0, t].
#[derive(Debug, Clone, Copy)]
pub struct ExponentialF {
    pub basis: HomogeneousBasis,
    p: [Complex64; 2],
    q: [Complex64; 2],
}

impl ExponentialF {
    pub fn new(params: &PhysicalParams, gamma: f64, t: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {t}")));
        }
        let roots = super::characteristic_roots(params, gamma)?;
        let basis = HomogeneousBasis::new(roots, t)?;
        let (p, q) = basis.fit(c(1.0), c(0.0), c(0.0), c(0.0));
        Ok(ExponentialF { basis, p, q })
    }

    pub fn value(&self, s: f64) -> Complex64 {
        self.basis.value(&self.p, &self.q, s)
    }

    pub fn derivative(&self, s: f64, n: u32) -> Complex64 {
        self.basis.derivative(&self.p, &self.q, s, n)
    }

    /// (f'(0), f'(t), f'(0) − f'(t)).
    pub fn endpoint_slopes(&self) -> (Complex64, Complex64, Complex64) {
        self.basis.endpoint_slopes(&self.p, &self.q)
    }

    pub fn on_grid(&self, grid: &TimeGrid) -> Result<KernelSolution> {
        check_horizon(self.basis.t, grid)?;
        let values = (0..grid.len()).map(|k| self.value(grid.node(k))).collect();
        let (d0, dt, gap) = self.endpoint_slopes();
        KernelSolution::new(*grid, values, d0, dt, gap, KernelKind::F)
    }
}

pub fn f_exponential(t: f64, params: &PhysicalParams, gamma: f64, grid: &TimeGrid) -> Result<KernelSolution> {
    ExponentialF::new(params, gamma, t)?.on_grid(grid)
}

/// Below this ω/γ the expanded closed form is a 0/0 and the λ → 0 limit is used.
pub const DEGENERACY_RATIO: f64 = 1e-8;

/// The closed form written out with the coefficients r, u, a, b, c, d in the
/// exponential basis. It overflows once Re(υ1)·t reaches a few hundred and is
/// 0/0 as ω → 0; kept as an independent cross-check of [`f_exponential`].
pub fn f_exponential_expanded(t: f64, params: &PhysicalParams, gamma: f64, grid: &TimeGrid) -> Result<KernelSolution> {
    check_gamma(gamma)?;
    check_horizon(t, grid)?;
    let omega = params.kernel_frequency();
    let nodes = grid.nodes();
    if omega * t < DEGENERACY_RATIO * gamma * t {
        let values = nodes.iter().map(|s| c(1.0 - s / t)).collect();
        return KernelSolution::new(*grid, values, c(-1.0 / t), c(-1.0 / t), c(0.0), KernelKind::F);
    }
    let r = CharacteristicRoots::from_frequency(gamma, omega)?;
    let u = [r.upsilon1, r.upsilon2];
    if u[0].re * t > 300.0 {
        return Err(Error::DegenerateHorizon(format!(
            "expanded closed form overflows for Re(υ1)·t = {:.1}",
            u[0].re * t
        )));
    }
    if (u[1].norm() * t) < 1e-150 {
        return Err(Error::DegenerateHorizon(format!("hyperbolic arguments underflow at t = {t:e}")));
    }
    let zeta = r.zeta;
    let sg = [1.0, -1.0];
    let a: Vec<Complex64> = (0..2).map(|k| gamma * u[k].powu(3) * (u[k] * u[k] + sg[k] * zeta)).collect();
    let b: Vec<Complex64> =
        (0..2).map(|k| u[k] * u[k] * (u[k].powu(4) + sg[k] * gamma * gamma * zeta)).collect();
    let cc = u[0].powu(3) * u[1].powu(3);
    let d: Vec<Complex64> = (0..2).map(|k| -gamma * u[k].powu(3) * u[1 - k] * u[1 - k]).collect();
    let rk = |k: usize, x: f64| {
        let kb = 1 - k;
        a[kb] * (u[kb] * x).cosh() + b[kb] * (u[kb] * x).sinh()
    };
    let uk = |k: usize, x: f64| {
        let kb = 1 - k;
        d[k] * (u[kb] * x).sinh() - cc * (u[kb] * x).cosh()
    };
    let uk_prime = |k: usize, x: f64| {
        let kb = 1 - k;
        u[kb] * (d[k] * (u[kb] * x).cosh() - cc * (u[kb] * x).sinh())
    };
    let den: Complex64 = 2.0 * cc
        + (0..2)
            .map(|k| rk(k, t) * (u[k] * t).sinh() + uk(k, t) * (u[k] * t).cosh())
            .sum::<Complex64>();
    let value = |s: f64| -> Complex64 {
        (0..2)
            .map(|k| rk(k, t) * (u[k] * (t - s)).sinh() + uk(k, t) * (u[k] * (t - s)).cosh() - uk(k, s))
            .sum::<Complex64>()
            / den
    };
    let slope = |s: f64| -> Complex64 {
        (0..2)
            .map(|k| {
                -u[k] * rk(k, t) * (u[k] * (t - s)).cosh() - u[k] * uk(k, t) * (u[k] * (t - s)).sinh()
                    - uk_prime(k, s)
            })
            .sum::<Complex64>()
            / den
    };
    let values = nodes.iter().map(|&s| value(s)).collect();
    let d0 = slope(0.0);
    let dt = slope(t);
    KernelSolution::new(*grid, values, d0, dt, d0 - dt, KernelKind::F)
}

/// Particular solutions of R'' − υ²R = w for the piecewise-linear interpolant
/// of the noise, exact at the nodes. Returns (R, R') per node.
fn resolvent(v: Complex64, noise: &NoisePath) -> (Vec<Complex64>, Vec<Complex64>) {
    let w = noise.values();
    let n = w.len();
    let d = noise.grid().spacing();
    let t = noise.grid().horizon();
    let mut r = vec![c(0.0); n];
    let mut rp = vec![c(0.0); n];
    if v.re * t <= 2.0 {
        // Causal solution from R(0) = R'(0) = 0; growth is at most e².
        let step = CausalStep::new(v, d);
        for j in 0..n - 1 {
            let (a, b) = step.advance(r[j], rp[j], w[j], w[j + 1]);
            r[j + 1] = a;
            rp[j + 1] = b;
        }
    } else {
        // Decaying two-sided solution −(1/2υ)∫ e^{−υ|s−l|} w(l) dl.
        let z = v * d;
        let decay = (-z).exp();
        let near = psi(z) * d;
        let far = (phi1(z) - psi(z)) * d;
        let mut left = vec![c(0.0); n];
        let mut right = vec![c(0.0); n];
        for j in 0..n - 1 {
            left[j + 1] = decay * left[j] + near * w[j] + far * w[j + 1];
        }
        for j in (0..n - 1).rev() {
            right[j] = decay * right[j + 1] + near * w[j + 1] + far * w[j];
        }
        for j in 0..n {
            r[j] = -(left[j] + right[j]) / (2.0 * v);
            rp[j] = (left[j] - right[j]) / 2.0;
        }
    }
    (r, rp)
}

/// Closed-form h for the exponential correlation and a given noise path.
///
/// A particular solution of the fourth-order equation is assembled from the
/// two resolvents, P = c·(υ1²R2 − υ2²R1)/(υ1² − υ2²) with c = −iħ√λ/m, which
/// needs only noise values. A homogeneous correction then imposes h(0) = h(t) = 0
/// and the two third-derivative conditions inherited from the memory integral.
/// The noise derivative cancels from those conditions identically.
pub fn h_exponential(t: f64, params: &PhysicalParams, gamma: f64, noise: &NoisePath) -> Result<KernelSolution> {
    check_gamma(gamma)?;
    let grid = *noise.grid();
    check_horizon(t, &grid)?;
    let n = grid.len();
    if noise.is_zero() || params.lambda() == 0.0 {
        return KernelSolution::new(grid, vec![c(0.0); n], c(0.0), c(0.0), c(0.0), KernelKind::H);
    }
    let roots = super::characteristic_roots(params, gamma)?;
    let basis = HomogeneousBasis::new(roots, t)?;
    let (r1, r1p) = resolvent(roots.upsilon1, noise);
    let (r2, r2p) = resolvent(roots.upsilon2, noise);
    let cf = -I * params.hbar() * params.lambda().sqrt() / params.m();
    let (x1, x2, zeta) = (roots.x1, roots.x2, roots.zeta);
    let q = |j: usize| (x1 * r2[j] - x2 * r1[j]) / zeta;
    let qp = |j: usize| (x1 * r2p[j] - x2 * r1p[j]) / zeta;
    let kk = -cf * x1 * x2 / zeta;
    let last = n - 1;
    let b0 = kk * ((r2p[0] - r1p[0]) - gamma * (r2[0] - r1[0]));
    let bt = kk * ((r2p[last] - r1p[last]) + gamma * (r2[last] - r1[last]));
    let (p, qq) = basis.fit(-cf * q(0), -cf * q(last), b0, bt);
    let values = (0..n).map(|j| cf * q(j) + basis.value(&p, &qq, grid.node(j))).collect();
    let (h0, ht, _) = basis.endpoint_slopes(&p, &qq);
    let d0 = cf * qp(0) + h0;
    let dt = cf * qp(last) + ht;
    KernelSolution::new(grid, values, d0, dt, d0 - dt, KernelKind::H)
}

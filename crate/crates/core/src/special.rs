//! Complex elementary functions evaluated without overflow or cancellation in
//! the regimes the kernels hit: arguments with |Re z| up to ~1e3 and below 1e-18.

use num_complex::Complex64;

use crate::c;

const SERIES_CUTOFF: f64 = 0.5;

/// e^z − 1.
pub fn expm1(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    if x.abs() < 1.0 && y.abs() < 1.0 {
        let s = (0.5 * y).sin();
        let re = x.exp_m1() * y.cos() - 2.0 * s * s;
        let im = x.exp() * y.sin();
        Complex64::new(re, im)
    } else {
        z.exp() - 1.0
    }
}

/// tanh(z), stable for large |Re z|.
pub fn tanh(z: Complex64) -> Complex64 {
    if z.re < 0.0 {
        return -tanh(-z);
    }
    let e = (-2.0 * z).exp();
    -expm1(-2.0 * z) / (1.0 + e)
}

/// v·tanh(v a).
pub fn v_tanh(v: Complex64, a: f64) -> Complex64 {
    v * tanh(v * a)
}

/// v·coth(v a), finite as v → 0 where it tends to 1/a.
pub fn v_coth(v: Complex64, a: f64) -> Complex64 {
    let z = v * a;
    if z.norm() < 1e-3 {
        let z2 = z * z;
        (1.0 + z2 / 3.0 - z2 * z2 / 45.0 + 2.0 * z2 * z2 * z2 / 945.0) / a
    } else {
        v / tanh(z)
    }
}

/// cosh(v x)/cosh(v a) for |x| ≤ a and Re v ≥ 0.
pub fn cosh_ratio(v: Complex64, x: f64, a: f64) -> Complex64 {
    let ax = x.abs();
    let lead = (v * (ax - a)).exp();
    lead * (1.0 + (-2.0 * v * ax).exp()) / (1.0 + (-2.0 * v * a).exp())
}

/// sinh(v x)/sinh(v a) for |x| ≤ a and Re v ≥ 0; tends to x/a as v → 0.
pub fn sinh_ratio(v: Complex64, x: f64, a: f64) -> Complex64 {
    if v == Complex64::new(0.0, 0.0) {
        return c(x / a);
    }
    if x == 0.0 {
        return c(0.0);
    }
    let ax = x.abs();
    let lead = (v * (ax - a)).exp();
    let r = lead * expm1(-2.0 * v * ax) / expm1(-2.0 * v * a);
    if x < 0.0 {
        -r
    } else {
        r
    }
}

/// (1 − e^{−z})/z.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_CUTOFF {
        // Σ (−z)^m/(m+1)!
        let mut term = c(1.0);
        let mut sum = c(1.0);
        for m in 1..20 {
            term = term * (-z) / (m as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        -expm1(-z) / z
    }
}

/// (1 − e^{−z}(1 + z))/z².
pub fn psi(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_CUTOFF {
        // Σ (−1)^m (m+1) z^m/(m+2)!
        let mut pow = c(0.5);
        let mut sum = c(0.5);
        for m in 1..20 {
            pow = pow * (-z) / (m as f64 + 2.0);
            sum += pow * (m as f64 + 1.0);
        }
        sum
    } else {
        (1.0 - (-z).exp() * (1.0 + z)) / (z * z)
    }
}

/// Weights that advance (R, R') across one interval of width `d` for
/// R'' − v²R = w with w linear on the interval.
#[derive(Debug, Clone, Copy)]
pub struct CausalStep {
    pub cosh: Complex64,
    pub sinh_over_v: Complex64,
    pub v_sinh: Complex64,
    pub s0: Complex64,
    pub s1: Complex64,
    pub c0: Complex64,
    pub c1: Complex64,
}

impl CausalStep {
    pub fn new(v: Complex64, d: f64) -> Self {
        let z = v * d;
        let z2 = z * z;
        let (cosh, sinh_z_over_z, s0n, s1n, c1n);
        if z.norm() < SERIES_CUTOFF {
            // Even power series in z², coefficients listed per quantity.
            let mut p = c(1.0);
            let mut ch = c(0.0);
            let mut sh = c(0.0);
            let mut a0 = c(0.0);
            let mut a1 = c(0.0);
            let mut b1 = c(0.0);
            for n in 0..12 {
                let k = 2 * n;
                let f_k = factorial(k);
                let f_k1 = factorial(k + 1);
                let f_k2 = factorial(k + 2);
                let f_k3 = factorial(k + 3);
                ch += p / f_k;
                sh += p / f_k1;
                a0 += p / f_k2;
                a1 += p * (k as f64 + 2.0) / f_k3;
                b1 += p * (k as f64 + 1.0) / f_k2;
                p *= z2;
            }
            cosh = ch;
            sinh_z_over_z = sh;
            s0n = a0;
            s1n = a1;
            c1n = b1;
        } else {
            let e = z.exp();
            let ei = (-z).exp();
            let ch = 0.5 * (e + ei);
            let sh = 0.5 * (e - ei);
            cosh = ch;
            sinh_z_over_z = sh / z;
            s0n = (ch - 1.0) / z2;
            s1n = (ch - sh / z) / z2;
            c1n = (z * sh - ch + 1.0) / z2;
        }
        CausalStep {
            cosh,
            sinh_over_v: sinh_z_over_z * d,
            v_sinh: sinh_z_over_z * z * v,
            s0: s0n * d * d,
            s1: s1n * d * d,
            c0: sinh_z_over_z * d,
            c1: c1n * d,
        }
    }

    pub fn advance(&self, r: Complex64, rp: Complex64, w0: f64, w1: f64) -> (Complex64, Complex64) {
        let r_next = self.cosh * r + self.sinh_over_v * rp + self.s1 * w0 + (self.s0 - self.s1) * w1;
        let rp_next = self.v_sinh * r + self.cosh * rp + self.c1 * w0 + (self.c0 - self.c1) * w1;
        (r_next, rp_next)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// LU factorization of a dense complex matrix, kept around for repeated solves.
pub struct DenseLu {
    lu: LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
    log_abs_det: f64,
}

/// Pivot ratios above this are treated as numerically singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

impl DenseLu {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        let lu = m.lu();
        let u = lu.u();
        let mut max = 0.0f64;
        let mut min = f64::INFINITY;
        let mut log_abs_det = 0.0;
        for k in 0..u.nrows() {
            let d = u[(k, k)].norm();
            max = max.max(d);
            min = min.min(d);
            log_abs_det += d.ln();
        }
        drop(u);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !condition.is_finite() || condition > SINGULAR_CONDITION {
            return Err(Error::SolverFailure { condition });
        }
        Ok(DenseLu { lu, condition, log_abs_det })
    }

    /// Ratio of the largest to smallest pivot magnitude, a cheap lower bound
    /// on the 2-norm condition number.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let b = DVector::from_column_slice(rhs);
        match self.lu.solve(&b) {
            Some(x) => Ok(x.iter().copied().collect()),
            None => Err(Error::SolverFailure { condition: self.condition }),
        }
    }

    /// log|det| from the pivots.
    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }
}

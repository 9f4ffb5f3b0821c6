use num_complex::Complex64;

use super::{check_horizon, KernelKind, KernelSolution};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::params::PhysicalParams;
use crate::special::{sinh_ratio, v_coth, v_tanh};
use crate::I;

/// White-noise kernel: (im/2ħ)f'' + λf = 0 with f(0)=1, f(t)=0, i.e.
/// f(s) = sinh(κ(t−s))/sinh(κt) with κ² = 2iħλ/m.
#[derive(Debug, Clone, Copy)]
pub struct MarkovF {
    pub kappa: Complex64,
    pub t: f64,
}

impl MarkovF {
    pub fn new(params: &PhysicalParams, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {t}")));
        }
        let kappa = (2.0 * I * params.hbar() * params.lambda() / params.m()).sqrt();
        Ok(MarkovF { kappa, t })
    }

    pub fn value(&self, s: f64) -> Complex64 {
        let x = (self.t - s).clamp(0.0, self.t);
        sinh_ratio(self.kappa, x, self.t)
    }

    /// (f'(0), f'(t), f'(0) − f'(t)).
    pub fn endpoint_slopes(&self) -> (Complex64, Complex64, Complex64) {
        let d0 = -v_coth(self.kappa, self.t);
        let gap = -v_tanh(self.kappa, 0.5 * self.t);
        (d0, d0 - gap, gap)
    }

    pub fn on_grid(&self, grid: &TimeGrid) -> Result<KernelSolution> {
        check_horizon(self.t, grid)?;
        let values = (0..grid.len()).map(|k| self.value(grid.node(k))).collect();
        let (d0, dt, gap) = self.endpoint_slopes();
        KernelSolution::new(*grid, values, d0, dt, gap, KernelKind::F)
    }
}

pub fn markov_f(t: f64, params: &PhysicalParams, grid: &TimeGrid) -> Result<KernelSolution> {
    MarkovF::new(params, t)?.on_grid(grid)
}

//! The kernels f (homogeneous, f(0)=1, f(t)=0) and h (noise driven, zero at
//! both ends) of the memory boundary-value problem
//! `(im/2ħ) y'' + λ ∫₀ᵗ α(s−r) y(r) dr = rhs`.

mod exponential;
mod markov;
mod numeric;
mod roots;

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

pub use exponential::{
    f_exponential, f_exponential_expanded, h_exponential, ExponentialF, HomogeneousBasis,
    DEGENERACY_RATIO,
};
pub use markov::{markov_f, MarkovF};
pub use numeric::{
    kernel_residual, kernel_residual_with, solve_f_numeric, solve_f_numeric_with, solve_h_numeric,
    solve_h_numeric_with, KernelBvp, NumericOptions, Quadrature,
};
pub use roots::{characteristic_roots, CharacteristicRoots};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    F,
    H,
}

/// A kernel on a grid with its endpoint derivatives.
///
/// `d_gap` is f'(0) − f'(t), stored separately because the analytic route
/// gets it without the cancellation that subtracting the endpoints incurs.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSolution {
    pub grid: TimeGrid,
    pub values: Vec<Complex64>,
    pub d_start: Complex64,
    pub d_end: Complex64,
    pub d_gap: Complex64,
    pub kind: KernelKind,
}

impl KernelSolution {
    pub(crate) fn new(
        grid: TimeGrid,
        values: Vec<Complex64>,
        d_start: Complex64,
        d_end: Complex64,
        d_gap: Complex64,
        kind: KernelKind,
    ) -> Result<Self> {
        if !crate::all_finite(&values) || !crate::all_finite(&[d_start, d_end, d_gap]) {
            return Err(Error::DegenerateKernel(format!(
                "non-finite {kind:?} kernel on horizon {:e}",
                grid.horizon()
            )));
        }
        Ok(KernelSolution { grid, values, d_start, d_end, d_gap, kind })
    }

    /// y(t − s_k) by index reversal.
    pub fn reversed(&self) -> Vec<Complex64> {
        self.values.iter().rev().copied().collect()
    }

    pub fn sup_distance(&self, other: &[Complex64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["s", "re", "im"])?;
        let row = |label: String, z: Complex64| [label, format!("{:.16e}", z.re), format!("{:.16e}", z.im)];
        for (k, v) in self.values.iter().enumerate() {
            wtr.write_record(row(format!("{:.16e}", self.grid.node(k)), *v))?;
        }
        wtr.write_record(row("d_start".into(), self.d_start))?;
        wtr.write_record(row("d_end".into(), self.d_end))?;
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

pub(crate) fn check_horizon(t: f64, grid: &TimeGrid) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {t}")));
    }
    if (grid.horizon() - t).abs() > 1e-12 * t {
        return Err(Error::InvalidInput(format!(
            "grid horizon {:e} does not match t = {t:e}",
            grid.horizon()
        )));
    }
    Ok(())
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on [0, t] with `n` nodes, both endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t: f64,
    n: usize,
}

pub fn make_grid(t: f64, n: usize) -> Result<TimeGrid> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidGrid(format!("horizon must be positive, got {t}")));
    }
    if n < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {n}")));
    }
    Ok(TimeGrid { t, n })
}

impl TimeGrid {
    pub fn horizon(&self) -> f64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn intervals(&self) -> usize {
        self.n - 1
    }

    pub fn spacing(&self) -> f64 {
        self.t / (self.n - 1) as f64
    }

    /// s_k = k·Δ, with the last node pinned to t.
    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.t
        } else {
            k as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    /// Trapezoid weights on this grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let d = self.spacing();
        let mut w = vec![d; self.n];
        w[0] = 0.5 * d;
        w[self.n - 1] = 0.5 * d;
        w
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.n == other.n && (self.t - other.t).abs() <= 1e-12 * self.t.abs().max(other.t.abs())
    }
}

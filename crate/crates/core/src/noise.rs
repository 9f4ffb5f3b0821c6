use std::io::{Read, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{make_grid, TimeGrid};

/// Stationary correlation function α(|τ|) of the driving noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CorrelationKernel {
    /// (γ/2)·e^{−γ|τ|}
    Exponential { gamma: f64 },
    /// α sampled at lags 0, step, 2·step, …; linear in between.
    Tabulated { step: f64, values: Vec<f64> },
}

impl CorrelationKernel {
    pub fn exponential(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        Ok(CorrelationKernel::Exponential { gamma })
    }

    pub fn tabulated(step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!("lag step must be positive, got {step}")));
        }
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "tabulated kernel needs at least two finite values".into(),
            ));
        }
        Ok(CorrelationKernel::Tabulated { step, values })
    }

    pub fn max_lag(&self) -> f64 {
        match self {
            CorrelationKernel::Exponential { .. } => f64::INFINITY,
            CorrelationKernel::Tabulated { step, values } => step * (values.len() - 1) as f64,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            CorrelationKernel::Exponential { gamma } => Some(*gamma),
            CorrelationKernel::Tabulated { .. } => None,
        }
    }
}

pub fn kernel_eval(kernel: &CorrelationKernel, tau: f64) -> Result<f64> {
    if !tau.is_finite() {
        return Err(Error::InvalidInput(format!("lag must be finite, got {tau}")));
    }
    let lag = tau.abs();
    match kernel {
        CorrelationKernel::Exponential { gamma } => Ok(0.5 * gamma * (-gamma * lag).exp()),
        CorrelationKernel::Tabulated { step, values } => {
            let max = kernel.max_lag();
            if lag > max * (1.0 + 1e-12) {
                return Err(Error::OutOfRange { lag, max });
            }
            let x = (lag / step).min((values.len() - 1) as f64);
            let k = (x.floor() as usize).min(values.len() - 2);
            let frac = x - k as f64;
            Ok(values[k] * (1.0 - frac) + values[k + 1] * frac)
        }
    }
}

/// One realization of the noise on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    grid: TimeGrid,
    values: Vec<f64>,
    seed: u64,
}

impl NoisePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>, seed: u64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "noise has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("noise values must be finite".into()));
        }
        Ok(NoisePath { grid, values, seed })
    }

    pub fn zero(grid: TimeGrid) -> Self {
        NoisePath { grid, values: vec![0.0; grid.len()], seed: 0 }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// The first `nodes` values, as a path on the correspondingly shorter horizon.
    pub fn restrict(&self, nodes: usize) -> Result<NoisePath> {
        if nodes < 3 || nodes > self.values.len() {
            return Err(Error::InvalidInput(format!(
                "cannot restrict a {}-node path to {nodes} nodes",
                self.values.len()
            )));
        }
        let grid = make_grid(self.grid.node(nodes - 1), nodes)?;
        Ok(NoisePath { grid, values: self.values[..nodes].to_vec(), seed: self.seed })
    }

    /// Piecewise-linear interpolant at time s ∈ [0, t].
    pub fn interpolate(&self, s: f64) -> f64 {
        let d = self.grid.spacing();
        let n = self.values.len();
        let x = (s / d).clamp(0.0, (n - 1) as f64);
        let k = (x.floor() as usize).min(n - 2);
        let frac = x - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    /// Pointwise sum, for linearity checks.
    pub fn add(&self, other: &NoisePath) -> Result<NoisePath> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::InvalidInput("noise paths live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(NoisePath { grid: self.grid, values, seed: self.seed })
    }

    pub fn scaled(&self, k: f64) -> NoisePath {
        NoisePath {
            grid: self.grid,
            values: self.values.iter().map(|v| k * v).collect(),
            seed: self.seed,
        }
    }

    pub fn with_value(&self, index: usize, value: f64) -> NoisePath {
        let mut values = self.values.clone();
        values[index] = value;
        NoisePath { grid: self.grid, values, seed: self.seed }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["s", "w"])?;
        for (k, w) in self.values.iter().enumerate() {
            wtr.write_record([format!("{:.16e}", self.grid.node(k)), format!("{w:.16e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads `s,w` rows; the nodes must form a uniform grid starting at 0.
    pub fn read_csv<R: Read>(input: R, seed: u64) -> Result<NoisePath> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut s = Vec::new();
        let mut w = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|x| x.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidInput(format!("bad noise row {:?}", rec)))
            };
            s.push(parse(0)?);
            w.push(parse(1)?);
        }
        if s.len() < 3 || s[0] != 0.0 {
            return Err(Error::InvalidInput("noise file must start at s = 0 with ≥ 3 rows".into()));
        }
        let grid = make_grid(*s.last().unwrap(), s.len())?;
        let d = grid.spacing();
        for (k, sk) in s.iter().enumerate() {
            if (sk - grid.node(k)).abs() > 1e-9 * d {
                return Err(Error::InvalidInput(format!("noise nodes are not uniform at row {k}")));
            }
        }
        NoisePath::new(grid, w, seed)
    }
}

/// Seed of trajectory `index` under `master`; streams of one ChaCha key.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Counter-based standard normals: value `k` depends only on (seed, k).
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Jumps to node `k` (four 32-bit words per node).
    pub fn seek(&mut self, k: u64) {
        self.rng.set_word_pos(4 * k as u128);
    }

    /// Box–Muller from exactly two 64-bit words.
    pub fn next_normal(&mut self) -> f64 {
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        let u1 = ((a >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal_at(seed: u64, k: u64) -> f64 {
        let mut s = NormalStream::new(seed);
        s.seek(k);
        s.next_normal()
    }
}

/// Exact stationary Ornstein–Uhlenbeck sampling of the exponential kernel.
pub fn sample_exponential_noise(gamma: f64, grid: &TimeGrid, seed: u64) -> Result<NoisePath> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let d = grid.spacing();
    let decay = (-gamma * d).exp();
    let kick = (0.5 * gamma * -(-2.0 * gamma * d).exp_m1()).sqrt();
    let mut stream = NormalStream::new(seed);
    let mut values = Vec::with_capacity(grid.len());
    let mut w = (0.5 * gamma).sqrt() * stream.next_normal();
    values.push(w);
    for _ in 1..grid.len() {
        w = decay * w + kick * stream.next_normal();
        values.push(w);
    }
    NoisePath::new(*grid, values, seed)
}

fn check_paths(paths: &[NoisePath], lag: usize) -> Result<usize> {
    let first = paths
        .first()
        .ok_or_else(|| Error::InvalidInput("empty path collection".into()))?;
    let n = first.values.len();
    if paths.iter().any(|p| !p.grid.same_as(&first.grid)) {
        return Err(Error::InvalidInput("paths do not share one grid".into()));
    }
    if lag >= n {
        return Err(Error::InvalidInput(format!("lag {lag} ≥ node count {n}")));
    }
    Ok(n)
}

fn lagged_product_mean(p: &NoisePath, lag: usize) -> f64 {
    let n = p.values.len();
    let m = n - lag;
    (0..m).map(|k| p.values[k] * p.values[k + lag]).sum::<f64>() / m as f64
}

/// Cov(w_k, w_{k+lag}) averaged over k and paths. The process is zero-mean by
/// construction, so the known-mean product estimator is unbiased.
pub fn empirical_covariance(paths: &[NoisePath], lag: usize) -> Result<f64> {
    check_paths(paths, lag)?;
    Ok(paths.iter().map(|p| lagged_product_mean(p, lag)).sum::<f64>() / paths.len() as f64)
}

/// Estimate and its Monte Carlo standard error (paths are independent).
pub fn covariance_with_error(paths: &[NoisePath], lag: usize) -> Result<(f64, f64)> {
    check_paths(paths, lag)?;
    let per: Vec<f64> = paths.iter().map(|p| lagged_product_mean(p, lag)).collect();
    let n = per.len() as f64;
    let mean = per.iter().sum::<f64>() / n;
    if per.len() < 2 {
        return Ok((mean, 0.0));
    }
    let var = per.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

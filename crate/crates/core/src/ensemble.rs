//! Monte Carlo over noise realizations.
//!
//! A trajectory is one master noise path on [0, T_max]; each sample time T
//! reads the same path restricted to [0, T].

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{make_grid, TimeGrid};
use crate::kernels::{h_exponential, ExponentialF, KernelSolution};
use crate::noise::{derive_seed, sample_exponential_noise};
use crate::params::PhysicalParams;
use crate::propagator::{
    greens_coefficients, mean_momentum, mean_position, normalize, propagate_raw, spread_position,
    GaussianState,
};

/// Which probability measure ensemble averages are taken under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Reference measure of the noise: every trajectory counts once.
    Raw,
    /// Trajectories weighted by ‖ψ_T‖² of the linear evolution, self-normalized.
    #[default]
    Physical,
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Measure::Raw),
            "physical" => Ok(Measure::Physical),
            other => Err(Error::InvalidParameter(format!("unknown measure `{other}`"))),
        }
    }
}

/// Master grid plus the node indices at which states are read out.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSchedule {
    master: TimeGrid,
    nodes: Vec<usize>,
}

impl SampleSchedule {
    /// `n_times` equally spaced readouts up to `t_max`. The master grid has at
    /// least `min_nodes` nodes, rounded up so every readout falls on a node.
    pub fn uniform(t_max: f64, n_times: usize, min_nodes: usize) -> Result<Self> {
        if n_times == 0 {
            return Err(Error::InvalidInput("need at least one sample time".into()));
        }
        let per = (min_nodes.saturating_sub(1)).div_ceil(n_times).max(2);
        let intervals = per * n_times;
        let master = make_grid(t_max, intervals + 1)?;
        let nodes = (1..=n_times).map(|i| i * per).collect();
        Ok(SampleSchedule { master, nodes })
    }

    pub fn master(&self) -> &TimeGrid {
        &self.master
    }

    pub fn times(&self) -> Vec<f64> {
        self.nodes.iter().map(|&k| self.master.node(k)).collect()
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.nodes.iter().map(|k| k + 1).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub times: Vec<f64>,
    pub mean_position: Vec<f64>,
    pub mean_momentum: Vec<f64>,
    pub sigma_position: Vec<f64>,
    /// ln ‖ψ_T‖² before renormalization.
    pub log_norm: Vec<f64>,
}

/// Everything a trajectory needs that does not depend on the noise.
pub struct EnsembleSetup {
    params: PhysicalParams,
    gamma: f64,
    state0: GaussianState,
    schedule: SampleSchedule,
    f: Vec<KernelSolution>,
}

impl EnsembleSetup {
    pub fn new(params: &PhysicalParams, gamma: f64, state0: &GaussianState, schedule: &SampleSchedule) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ensembles need a finite positive gamma, got {gamma}"
            )));
        }
        let f = schedule
            .times()
            .iter()
            .zip(schedule.node_counts())
            .map(|(&t, n)| ExponentialF::new(params, gamma, t)?.on_grid(&make_grid(t, n)?))
            .collect::<Result<_>>()?;
        Ok(EnsembleSetup { params: *params, gamma, state0: *state0, schedule: schedule.clone(), f })
    }

    pub fn schedule(&self) -> &SampleSchedule {
        &self.schedule
    }

    pub fn trajectory(&self, seed: u64) -> Result<TrajectoryRecord> {
        let master = sample_exponential_noise(self.gamma, self.schedule.master(), seed)?;
        let times = self.schedule.times();
        let mut rec = TrajectoryRecord {
            seed,
            times: times.clone(),
            mean_position: Vec::with_capacity(times.len()),
            mean_momentum: Vec::with_capacity(times.len()),
            sigma_position: Vec::with_capacity(times.len()),
            log_norm: Vec::with_capacity(times.len()),
        };
        let hbar = self.params.hbar();
        for ((&t, n), f) in times.iter().zip(self.schedule.node_counts()).zip(&self.f) {
            let mut step = || -> Result<()> {
                let noise = master.restrict(n)?;
                let h = h_exponential(t, &self.params, self.gamma, &noise)?;
                let g = greens_coefficients(f, &h, &noise, &self.params)?;
                let raw = propagate_raw(&self.state0, &g)?;
                let state = normalize(&raw)?;
                rec.log_norm.push(raw.log_norm_sq()?);
                rec.mean_position.push(mean_position(&state)?);
                rec.mean_momentum.push(mean_momentum(&state, hbar)?);
                rec.sigma_position.push(spread_position(&state)?);
                Ok(())
            };
            step().map_err(|e| Error::Trajectory { seed, time: t, source: Box::new(e) })?;
        }
        Ok(rec)
    }
}

pub fn run_trajectory(
    params: &PhysicalParams,
    gamma: f64,
    state0: &GaussianState,
    schedule: &SampleSchedule,
    seed: u64,
) -> Result<TrajectoryRecord> {
    EnsembleSetup::new(params, gamma, state0, schedule)?.trajectory(seed)
}

/// Per-time ensemble averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n: usize,
    pub measure: Measure,
    pub times: Vec<f64>,
    pub mean_q: Vec<f64>,
    pub se_q: Vec<f64>,
    pub mean_p: Vec<f64>,
    pub se_p: Vec<f64>,
    pub v_q: Vec<f64>,
    pub se_vq: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Kish effective sample size 1/Σπ² (equals n under the raw measure).
    pub ess: Vec<f64>,
}

struct Moments {
    mean: f64,
    se: f64,
    spread: f64,
    se_spread: f64,
}

/// Weighted mean, its linearized standard error, the dispersion V and a
/// delta-method standard error for V. `probs` sum to one.
fn moments(x: &[f64], probs: &[f64], raw: bool) -> Moments {
    let n = x.len() as f64;
    let mean: f64 = x.iter().zip(probs).map(|(a, p)| a * p).sum();
    let var: f64 = x.iter().zip(probs).map(|(a, p)| p * (a - mean).powi(2)).sum();
    let (se, se_var) = if x.len() < 2 {
        (0.0, 0.0)
    } else if raw {
        let sample_var = var * n / (n - 1.0);
        let dev4: f64 = x.iter().map(|a| ((a - mean).powi(2) - var).powi(2)).sum::<f64>() / (n - 1.0);
        ((sample_var / n).sqrt(), (dev4 / n).sqrt())
    } else {
        let s: f64 = x.iter().zip(probs).map(|(a, p)| (p * (a - mean)).powi(2)).sum();
        let s2: f64 = x.iter().zip(probs).map(|(a, p)| (p * ((a - mean).powi(2) - var)).powi(2)).sum();
        (s.sqrt(), s2.sqrt())
    };
    let spread = var.sqrt();
    let se_spread = if spread > 0.0 { se_var / (2.0 * spread) } else { 0.0 };
    Moments { mean, se, spread, se_spread }
}

pub fn aggregate(records: &[TrajectoryRecord], measure: Measure) -> Result<EnsembleStats> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidInput("no trajectories to aggregate".into()))?;
    let nt = first.times.len();
    let n = records.len();
    let mut st = EnsembleStats {
        n,
        measure,
        times: first.times.clone(),
        mean_q: Vec::with_capacity(nt),
        se_q: Vec::with_capacity(nt),
        mean_p: Vec::with_capacity(nt),
        se_p: Vec::with_capacity(nt),
        v_q: Vec::with_capacity(nt),
        se_vq: Vec::with_capacity(nt),
        sigma: first.sigma_position.clone(),
        ess: Vec::with_capacity(nt),
    };
    for k in 0..nt {
        let probs: Vec<f64> = match measure {
            Measure::Raw => vec![1.0 / n as f64; n],
            Measure::Physical => {
                let top = records.iter().map(|r| r.log_norm[k]).fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = records.iter().map(|r| (r.log_norm[k] - top).exp()).collect();
                let total: f64 = w.iter().sum();
                w.iter().map(|v| v / total).collect()
            }
        };
        let q: Vec<f64> = records.iter().map(|r| r.mean_position[k]).collect();
        let p: Vec<f64> = records.iter().map(|r| r.mean_momentum[k]).collect();
        let raw = measure == Measure::Raw;
        let mq = moments(&q, &probs, raw);
        let mp = moments(&p, &probs, raw);
        st.mean_q.push(mq.mean);
        st.se_q.push(mq.se);
        st.v_q.push(mq.spread);
        st.se_vq.push(mq.se_spread);
        st.mean_p.push(mp.mean);
        st.se_p.push(mp.se);
        st.ess.push(1.0 / probs.iter().map(|p| p * p).sum::<f64>());
    }
    Ok(st)
}

/// Runs `n` trajectories with seeds `derive_seed(master_seed, i)` in parallel
/// and aggregates them in index order, so the result does not depend on
/// scheduling.
pub fn run_ensemble(
    params: &PhysicalParams,
    gamma: f64,
    state0: &GaussianState,
    schedule: &SampleSchedule,
    n: usize,
    master_seed: u64,
    measure: Measure,
) -> Result<EnsembleStats> {
    let records = run_records(params, gamma, state0, schedule, n, master_seed)?;
    aggregate(&records, measure)
}

pub fn run_records(
    params: &PhysicalParams,
    gamma: f64,
    state0: &GaussianState,
    schedule: &SampleSchedule,
    n: usize,
    master_seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one trajectory".into()));
    }
    let setup = EnsembleSetup::new(params, gamma, state0, schedule)?;
    let results: Vec<Result<TrajectoryRecord>> = (0..n as u64)
        .into_par_iter()
        .map(|i| setup.trajectory(derive_seed(master_seed, i)))
        .collect();
    let mut records = Vec::with_capacity(n);
    let mut failed = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                if let Error::Trajectory { seed, .. } = &e {
                    failed.push(*seed);
                }
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(Error::EnsembleFailure { seeds: failed, first: Box::new(e) });
    }
    Ok(records)
}

impl EnsembleStats {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "mean_q", "se_q", "mean_p", "se_p", "Vq", "sigma"])?;
        for k in 0..self.times.len() {
            let row = [
                self.times[k],
                self.mean_q[k],
                self.se_q[k],
                self.mean_p[k],
                self.se_p[k],
                self.v_q[k],
                self.sigma[k],
            ];
            wtr.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

//! `key = value` run files.
//!
//! ```text
//! # comment
//! m = 1
//! lambda = 0.1
//! gamma = 2, 10, inf
//! t_max = 1
//! sigma0 = 1
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use nmsse::ensemble::Measure;
use nmsse::propagator::GaussianState;
use nmsse::{make_params, PhysicalParams, UnitMode, HBAR_SI};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "key `{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, key: Some(key.to_string()), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeSpacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formats {
    Csv,
    Json,
    Both,
}

impl Formats {
    pub fn csv(self) -> bool {
        matches!(self, Formats::Csv | Formats::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Formats::Json | Formats::Both)
    }
}

impl std::str::FromStr for Formats {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "csv" => Ok(Formats::Csv),
            "json" => Ok(Formats::Json),
            "both" => Ok(Formats::Both),
            other => Err(format!("expected csv, json or both, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: PhysicalParams,
    /// Correlation rates; `f64::INFINITY` is the white-noise case.
    pub gammas: Vec<f64>,
    pub sigma0: f64,
    pub x0: f64,
    pub p0: f64,
    pub t_min: Option<f64>,
    pub t_max: f64,
    pub n_times: usize,
    pub time_spacing: TimeSpacing,
    pub grid_n: usize,
    pub n_traj: usize,
    pub master_seed: u64,
    pub measure: Measure,
    pub out_dir: PathBuf,
    pub formats: Formats,
    pub plot: bool,
}

const KEYS: &[&str] = &[
    "m",
    "hbar",
    "lambda",
    "gamma",
    "unit_mode",
    "sigma0",
    "x0",
    "p0",
    "t_min",
    "t_max",
    "n_times",
    "time_spacing",
    "N",
    "n_traj",
    "master_seed",
    "measure",
    "out_dir",
    "format",
    "plot",
];

const REQUIRED: &[&str] = &["m", "lambda", "gamma", "t_max", "sigma0"];

struct Entry {
    line: usize,
    value: String,
}

struct Raw(BTreeMap<String, Entry>);

impl Raw {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.0.get(key)
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => parse_number(&e.value)
                .map(Some)
                .ok_or_else(|| err(Some(e.line), key, format!("malformed number `{}`", e.value))),
        }
    }

    fn required(&self, key: &str) -> Result<(f64, usize), ConfigError> {
        let e = self.get(key).ok_or_else(|| err(None, key, "missing required key"))?;
        Ok((self.number(key)?.expect("present"), e.line))
    }

    fn count(&self, key: &str, default: usize) -> Result<(usize, Option<usize>), ConfigError> {
        match self.get(key) {
            None => Ok((default, None)),
            Some(e) => e
                .value
                .parse::<usize>()
                .map(|v| (v, Some(e.line)))
                .map_err(|_| err(Some(e.line), key, format!("malformed integer `{}`", e.value))),
        }
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
        t => t.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

fn positive(key: &str, line: Option<usize>, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(err(line, key, format!("must be positive and finite, got {v}")))
    }
}

/// Parses and validates a run file. Defaults: unit_mode = scaled, N = 2001,
/// n_times = 50, n_traj = 1, master_seed = 42, x0 = p0 = 0, linear spacing.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut raw = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError {
            line: Some(lineno),
            key: None,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(Some(lineno), key, "unknown key"));
        }
        if raw.contains_key(key) {
            return Err(err(Some(lineno), key, "given twice"));
        }
        raw.insert(key.to_string(), Entry { line: lineno, value: value.trim().to_string() });
    }
    let raw = Raw(raw);
    for key in REQUIRED {
        if raw.get(key).is_none() {
            return Err(err(None, key, "missing required key"));
        }
    }

    let unit_mode = match raw.get("unit_mode") {
        None => UnitMode::Scaled,
        Some(e) => e
            .value
            .parse::<UnitMode>()
            .map_err(|x| err(Some(e.line), "unit_mode", x.to_string()))?,
    };
    let (m, m_line) = raw.required("m")?;
    let (lambda, l_line) = raw.required("lambda")?;
    let hbar = raw.number("hbar")?.unwrap_or(match unit_mode {
        UnitMode::Si => HBAR_SI,
        UnitMode::Scaled => 1.0,
    });
    let params = make_params(m, hbar, lambda, unit_mode).map_err(|e| {
        let (key, line) = if !(m.is_finite() && m > 0.0) {
            ("m", m_line)
        } else if !(lambda.is_finite() && lambda >= 0.0) {
            ("lambda", l_line)
        } else {
            ("hbar", raw.get("hbar").map(|e| e.line).unwrap_or(0))
        };
        err(Some(line), key, e.to_string())
    })?;

    let g = raw.get("gamma").expect("checked");
    let mut gammas = Vec::new();
    for part in g.value.split(',') {
        let v = parse_number(part)
            .ok_or_else(|| err(Some(g.line), "gamma", format!("malformed number `{}`", part.trim())))?;
        if !(v > 0.0) {
            return Err(err(Some(g.line), "gamma", format!("must be positive, got {v}")));
        }
        gammas.push(v);
    }

    let (sigma0, s_line) = raw.required("sigma0")?;
    let sigma0 = positive("sigma0", Some(s_line), sigma0)?;
    let (t_max, t_line) = raw.required("t_max")?;
    let t_max = positive("t_max", Some(t_line), t_max)?;
    let x0 = raw.number("x0")?.unwrap_or(0.0);
    let p0 = raw.number("p0")?.unwrap_or(0.0);
    for key in ["x0", "p0"] {
        if let Some(v) = raw.number(key)? {
            if !v.is_finite() {
                return Err(err(raw.get(key).map(|e| e.line), key, "must be finite"));
            }
        }
    }

    let time_spacing = match raw.get("time_spacing") {
        None => TimeSpacing::Linear,
        Some(e) => match e.value.as_str() {
            "linear" => TimeSpacing::Linear,
            "log" => TimeSpacing::Log,
            other => return Err(err(Some(e.line), "time_spacing", format!("expected linear or log, got `{other}`"))),
        },
    };
    let t_min = match raw.number("t_min")? {
        None => None,
        Some(v) => {
            let line = raw.get("t_min").map(|e| e.line);
            let v = positive("t_min", line, v)?;
            if v >= t_max {
                return Err(err(line, "t_min", "must be smaller than t_max"));
            }
            Some(v)
        }
    };
    if time_spacing == TimeSpacing::Log && t_min.is_none() {
        return Err(err(raw.get("time_spacing").map(|e| e.line), "t_min", "log spacing needs t_min"));
    }

    let (grid_n, n_line) = raw.count("N", 2001)?;
    if grid_n < 3 {
        return Err(err(n_line, "N", "need at least 3 grid nodes"));
    }
    let (n_times, nt_line) = raw.count("n_times", 50)?;
    if n_times == 0 {
        return Err(err(nt_line, "n_times", "need at least one sample time"));
    }
    let (n_traj, tr_line) = raw.count("n_traj", 1)?;
    if n_traj == 0 {
        return Err(err(tr_line, "n_traj", "need at least one trajectory"));
    }
    let master_seed = match raw.get("master_seed") {
        None => 42,
        Some(e) => e
            .value
            .parse::<u64>()
            .map_err(|_| err(Some(e.line), "master_seed", format!("malformed integer `{}`", e.value)))?,
    };
    let measure = match raw.get("measure") {
        None => Measure::default(),
        Some(e) => e.value.parse().map_err(|x: nmsse::Error| err(Some(e.line), "measure", x.to_string()))?,
    };
    let out_dir = raw.get("out_dir").map(|e| PathBuf::from(&e.value)).unwrap_or_else(|| PathBuf::from("."));
    let formats = match raw.get("format") {
        None => Formats::Csv,
        Some(e) => e.value.parse().map_err(|x: String| err(Some(e.line), "format", x))?,
    };
    let plot = match raw.get("plot") {
        None => true,
        Some(e) => match e.value.as_str() {
            "svg" => true,
            "none" => false,
            other => return Err(err(Some(e.line), "plot", format!("expected svg or none, got `{other}`"))),
        },
    };

    Ok(RunConfig {
        params,
        gammas,
        sigma0,
        x0,
        p0,
        t_min,
        t_max,
        n_times,
        time_spacing,
        grid_n,
        n_traj,
        master_seed,
        measure,
        out_dir,
        formats,
        plot,
    })
}

impl RunConfig {
    /// α0 = 1/(4σ0²), centred at x0 with mean momentum p0.
    pub fn initial_state(&self) -> GaussianState {
        GaussianState::from_moments(self.sigma0, self.x0, self.p0, self.params.hbar()).expect("sigma0 validated")
    }

    /// Readout times in (0, t_max].
    pub fn sample_times(&self) -> Vec<f64> {
        let n = self.n_times;
        match self.time_spacing {
            TimeSpacing::Linear => {
                let start = self.t_min.unwrap_or(0.0);
                if self.t_min.is_some() && n > 1 {
                    (0..n).map(|k| start + (self.t_max - start) * k as f64 / (n - 1) as f64).collect()
                } else {
                    (1..=n).map(|k| self.t_max * k as f64 / n as f64).collect()
                }
            }
            TimeSpacing::Log => {
                let lo = self.t_min.expect("validated").log10();
                let hi = self.t_max.log10();
                if n == 1 {
                    return vec![self.t_max];
                }
                (0..n)
                    .map(|k| if k == n - 1 { self.t_max } else { 10f64.powf(lo + (hi - lo) * k as f64 / (n - 1) as f64) })
                    .collect()
            }
        }
    }

    /// The preset behind `figure1`: SI units, m = 1 kg, λ = 1e-2 m⁻²s⁻¹,
    /// σ0 = 1 m, γ ∈ {2, 10, 100, ∞} s⁻¹ and log times from 1e-4 s to 1e21 s.
    pub fn figure1() -> RunConfig {
        parse_config(
            "unit_mode = si\nm = 1\nlambda = 1e-2\nsigma0 = 1\ngamma = 2, 10, 100, inf\n\
             t_min = 1e-4\nt_max = 1e21\ntime_spacing = log\nn_times = 201\n",
        )
        .expect("preset is valid")
    }
}

pub fn gamma_label(g: f64) -> String {
    if g.is_infinite() {
        "inf".into()
    } else {
        format!("{g}")
    }
}

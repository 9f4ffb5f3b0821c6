use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use nmsse::ensemble::{run_ensemble, SampleSchedule};
use nmsse::kernels::{f_exponential, h_exponential, markov_f, KernelBvp, KernelSolution, NumericOptions};
use nmsse::noise::{sample_exponential_noise, CorrelationKernel};
use nmsse::oracle::{polygonal_report, OracleReport};
use nmsse::propagator::{free_spread, greens_coefficients, sigma_inf, spread_curve, GreensRecord};
use nmsse::{make_grid, Complex64, Error};

use crate::config::{gamma_label, RunConfig, TimeSpacing};
use crate::svg::{Plot, Series};

/// Largest grid the dense numeric solver is run on from the CLI.
const NUMERIC_MAX_N: usize = 4001;

/// Ensemble size from which the classical-mean test affects the exit status.
pub const CLASSICAL_MIN_TRAJ: usize = 1000;

pub const ORACLE_SLICES: [usize; 4] = [64, 128, 256, 512];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// What a command produced: files written, gating checks, and reported
/// claims that do not affect the exit status.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub claims: Vec<Check>,
}

impl Outcome {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(Check { name: name.into(), pass, detail });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug)]
pub enum CommandError {
    Model(Error),
    Io(PathBuf, std::io::Error),
    Usage(String),
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Model(e) => write!(f, "{e}"),
            CommandError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CommandError::Usage(s) => f.write_str(s),
        }
    }
}

impl std::error::Error for CommandError {}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        CommandError::Model(e)
    }
}

type Result<T> = std::result::Result<T, CommandError>;

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v > 0.0 {
        "inf".into()
    } else if v < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

fn jnum(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(num(v))
    }
}

struct Writer<'a> {
    cfg: &'a RunConfig,
    out: &'a mut Outcome,
}

impl Writer<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| CommandError::Io(p.clone(), e))?;
        self.out.files.push(p);
        Ok(())
    }

    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        if !self.cfg.formats.csv() {
            return Ok(());
        }
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CommandError::Model(Error::Csv(e));
        wtr.write_record(header).map_err(io)?;
        for r in rows {
            wtr.write_record(r).map_err(io)?;
        }
        let bytes = wtr.into_inner().map_err(|e| CommandError::Usage(e.to_string()))?;
        self.write(name, &bytes)
    }

    fn csv_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> nmsse::Result<()>) -> Result<()> {
        if !self.cfg.formats.csv() {
            return Ok(());
        }
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if !self.cfg.formats.json() {
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CommandError::Model(Error::Json(e)))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn svg(&mut self, name: &str, plot: Plot) -> Result<()> {
        if !self.cfg.plot {
            return Ok(());
        }
        self.write(name, plot.render().as_bytes())
    }
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| CommandError::Io(cfg.out_dir.clone(), e))
}

fn params_json(cfg: &RunConfig) -> Value {
    let p = &cfg.params;
    json!({
        "m": p.m(),
        "hbar": p.hbar(),
        "lambda": p.lambda(),
        "unit_mode": p.unit_mode(),
        "sigma0": cfg.sigma0,
        "x0": cfg.x0,
        "p0": cfg.p0,
    })
}

pub struct SpreadCurve {
    pub gamma: f64,
    pub times: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `f64::INFINITY` when there is no collapse.
    pub sigma_inf: f64,
}

pub fn spread_curves(cfg: &RunConfig) -> Result<Vec<SpreadCurve>> {
    let times = cfg.sample_times();
    let state0 = cfg.initial_state();
    cfg.gammas
        .iter()
        .map(|&g| {
            let sigma = spread_curve(&cfg.params, g, &state0, &times)?;
            let s_inf = match sigma_inf(&cfg.params, g) {
                Ok(v) => v,
                Err(Error::NoFiniteAsymptote(_)) => f64::INFINITY,
                Err(e) => return Err(e.into()),
            };
            Ok(SpreadCurve { gamma: g, times: times.clone(), sigma, sigma_inf: s_inf })
        })
        .collect()
}

pub fn cmd_spread(cfg: &RunConfig) -> Result<Outcome> {
    ensure_out_dir(cfg)?;
    let curves = spread_curves(cfg)?;
    let mut out = Outcome::default();
    write_spread(cfg, &curves, &mut out)?;

    let finite = curves.iter().all(|c| c.sigma.iter().all(|s| s.is_finite() && *s > 0.0));
    out.check("spread finite and positive", finite, format!("{} curves", curves.len()));
    if cfg.params.lambda() == 0.0 {
        let worst = curves
            .iter()
            .flat_map(|c| {
                c.times.iter().zip(&c.sigma).map(|(&t, &s)| {
                    let want = free_spread(&cfg.params, cfg.sigma0, t);
                    (s - want).abs() / want
                })
            })
            .fold(0.0, f64::max);
        out.check("free dispersion", worst <= 1e-10, format!("max rel deviation {worst:.3e}"));
    }
    Ok(out)
}

fn write_spread(cfg: &RunConfig, curves: &[SpreadCurve], out: &mut Outcome) -> Result<()> {
    let mut w = Writer { cfg, out };
    let rows: Vec<Vec<String>> = curves
        .iter()
        .flat_map(|c| {
            c.times
                .iter()
                .zip(&c.sigma)
                .map(|(&t, &s)| vec![gamma_label(c.gamma), num(t), num(s), num(c.sigma_inf)])
                .collect::<Vec<_>>()
        })
        .collect();
    w.table("spread.csv", &["gamma", "t", "sigma", "sigma_inf"], &rows)?;
    let json_curves: Vec<Value> = curves
        .iter()
        .map(|c| {
            json!({
                "gamma": gamma_label(c.gamma),
                "sigma_inf": jnum(c.sigma_inf),
                "t": c.times,
                "sigma": c.sigma,
            })
        })
        .collect();
    w.json("spread.json", &json!({ "params": params_json(cfg), "curves": json_curves }))?;

    let log = cfg.time_spacing == TimeSpacing::Log;
    let mut series: Vec<Series> = curves
        .iter()
        .map(|c| Series {
            label: format!("γ = {}", gamma_label(c.gamma)),
            points: c.times.iter().copied().zip(c.sigma.iter().copied()).collect(),
            dashed: false,
        })
        .collect();
    let mut seen: Vec<f64> = Vec::new();
    let (t0, t1) = (curves[0].times[0], *curves[0].times.last().unwrap());
    for c in curves {
        if c.sigma_inf.is_finite() && !seen.iter().any(|s| (s - c.sigma_inf).abs() <= 1e-12 * s) {
            seen.push(c.sigma_inf);
            series.push(Series {
                label: format!("σ∞ = {:.4e}", c.sigma_inf),
                points: vec![(t0, c.sigma_inf), (t1, c.sigma_inf)],
                dashed: true,
            });
        }
    }
    w.svg(
        "spread.svg",
        Plot {
            title: "Position spread σ(t)".into(),
            x_label: "t".into(),
            y_label: "σ".into(),
            x_log: log,
            y_log: log,
            series,
        },
    )
}

pub fn cmd_figure1(cfg: &RunConfig) -> Result<Outcome> {
    ensure_out_dir(cfg)?;
    let curves = spread_curves(cfg)?;
    let mut out = Outcome::default();
    write_spread(cfg, &curves, &mut out)?;

    let finite = curves.iter().all(|c| c.sigma.iter().all(|s| s.is_finite() && *s > 0.0));
    out.check("spread finite and positive", finite, format!("{} curves", curves.len()));
    let worst_asym = curves
        .iter()
        .map(|c| (c.sigma.last().unwrap() - c.sigma_inf).abs() / c.sigma_inf)
        .fold(0.0, f64::max);
    out.check(
        "final spread within 1% of σ∞",
        worst_asym <= 1e-2,
        format!("max rel deviation {worst_asym:.3e}"),
    );
    let mut ordered = true;
    for w in curves.windows(2) {
        if w[1].gamma > w[0].gamma {
            ordered &= w[0].sigma.iter().zip(&w[1].sigma).all(|(a, b)| *b <= *a * (1.0 + 1e-10));
        }
    }
    out.check("larger γ gives smaller σ at every t", ordered, "relative tolerance 1e-10".into());

    for c in &curves {
        let rising: Vec<f64> = (1..c.sigma.len()).filter(|&k| c.sigma[k] > c.sigma[k - 1]).map(|k| c.times[k]).collect();
        out.claims.push(Check {
            name: format!("σ decreases monotonically (γ = {})", gamma_label(c.gamma)),
            pass: rising.is_empty(),
            detail: match rising.first() {
                Some(t) => format!("{} rising steps, first at t = {t:.3e}", rising.len()),
                None => "no rising steps".into(),
            },
        });
    }
    if let Some(c10) = curves.iter().find(|c| c.gamma == 10.0) {
        let s = spread_curve(&cfg.params, 10.0, &cfg.initial_state(), &[1e-3])?[0];
        out.claims.push(Check {
            name: "σ(1e-3 s) ≤ 1e-7 m at γ = 10".into(),
            pass: s <= 1e-7,
            detail: format!("σ(1e-3 s) = {s:.7e} m, σ∞ = {:.6e} m", c10.sigma_inf),
        });
    }
    let mut report = String::new();
    for (kind, list) in [("CHECK", &out.checks), ("CLAIM", &out.claims)] {
        for c in list {
            report.push_str(&format!("{kind} {} {}: {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
        }
    }
    let mut w = Writer { cfg, out: &mut out };
    w.write("figure1_report.txt", report.as_bytes())?;
    Ok(out)
}

pub fn cmd_ensemble(cfg: &RunConfig) -> Result<Outcome> {
    let gamma = single_finite_gamma(cfg, "ensemble")?;
    if cfg.time_spacing != TimeSpacing::Linear || cfg.t_min.is_some() {
        return Err(CommandError::Usage("ensemble readouts are equally spaced on (0, t_max]; drop t_min and time_spacing".into()));
    }
    ensure_out_dir(cfg)?;
    let schedule = SampleSchedule::uniform(cfg.t_max, cfg.n_times, cfg.grid_n)?;
    let stats = run_ensemble(&cfg.params, gamma, &cfg.initial_state(), &schedule, cfg.n_traj, cfg.master_seed, cfg.measure)?;
    let mut out = Outcome::default();
    let mut w = Writer { cfg, out: &mut out };
    w.csv_with("ensemble.csv", |buf| stats.write_csv(buf))?;
    w.json("ensemble.json", &stats)?;
    let classical: Vec<(f64, f64)> = stats.times.iter().map(|&t| (t, cfg.x0 + cfg.p0 * t / cfg.params.m())).collect();
    w.svg(
        "ensemble.svg",
        Plot {
            title: format!("Ensemble mean position, n = {}", stats.n),
            x_label: "t".into(),
            y_label: "mean ⟨q⟩".into(),
            x_log: false,
            y_log: false,
            series: vec![
                Series {
                    label: "mean ⟨q⟩".into(),
                    points: stats.times.iter().copied().zip(stats.mean_q.iter().copied()).collect(),
                    dashed: false,
                },
                Series {
                    label: "+3 SE".into(),
                    points: stats.times.iter().enumerate().map(|(k, &t)| (t, stats.mean_q[k] + 3.0 * stats.se_q[k])).collect(),
                    dashed: true,
                },
                Series {
                    label: "−3 SE".into(),
                    points: stats.times.iter().enumerate().map(|(k, &t)| (t, stats.mean_q[k] - 3.0 * stats.se_q[k])).collect(),
                    dashed: true,
                },
                Series { label: "x0 + p0 t/m".into(), points: classical, dashed: false },
            ],
        },
    )?;
    if cfg.n_traj >= 2 {
        let mut worst_q = 0.0f64;
        let mut worst_p = 0.0f64;
        for (k, &t) in stats.times.iter().enumerate() {
            worst_q = worst_q.max((stats.mean_q[k] - (cfg.x0 + cfg.p0 * t / cfg.params.m())).abs() / stats.se_q[k]);
            worst_p = worst_p.max((stats.mean_p[k] - cfg.p0).abs() / stats.se_p[k]);
        }
        let min_ess = stats.ess.iter().cloned().fold(f64::INFINITY, f64::min);
        let line = Check {
            name: "classical means".into(),
            pass: worst_q <= 3.0 && worst_p <= 3.0,
            detail: format!(
                "n = {}, min ESS {min_ess:.1}, max |z| ⟨q⟩ {worst_q:.2}, ⟨p⟩ {worst_p:.2} (≤ 3)",
                cfg.n_traj
            ),
        };
        // Weighted standard errors are unreliable for small ensembles.
        if cfg.n_traj >= CLASSICAL_MIN_TRAJ {
            out.checks.push(line);
        } else {
            out.claims.push(line);
        }
    }
    Ok(out)
}

fn single_finite_gamma(cfg: &RunConfig, what: &str) -> Result<f64> {
    match cfg.gammas.as_slice() {
        [g] if g.is_finite() => Ok(*g),
        _ => Err(CommandError::Usage(format!("{what} needs exactly one finite gamma"))),
    }
}

#[derive(Serialize)]
struct KernelRow {
    gamma: String,
    f_start_error: f64,
    f_end_error: f64,
    h_start_error: Option<f64>,
    h_end_error: Option<f64>,
    f_numeric_rel: Option<f64>,
    h_numeric_rel: Option<f64>,
    f_residual: Option<f64>,
    h_residual: Option<f64>,
    condition: Option<f64>,
}

fn rel_sup(a: &KernelSolution, b: &KernelSolution) -> f64 {
    let scale = a.sup_norm();
    let d = a.sup_distance(&b.values);
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

pub fn cmd_kernels(cfg: &RunConfig) -> Result<Outcome> {
    ensure_out_dir(cfg)?;
    let t = cfg.t_max;
    let grid = make_grid(t, cfg.grid_n)?;
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &gamma in &cfg.gammas {
        let label = gamma_label(gamma);
        let mut w = Writer { cfg, out: &mut out };
        let mut row = KernelRow {
            gamma: label.clone(),
            f_start_error: 0.0,
            f_end_error: 0.0,
            h_start_error: None,
            h_end_error: None,
            f_numeric_rel: None,
            h_numeric_rel: None,
            f_residual: None,
            h_residual: None,
            condition: None,
        };
        let f = if gamma.is_finite() {
            f_exponential(t, &cfg.params, gamma, &grid)?
        } else {
            markov_f(t, &cfg.params, &grid)?
        };
        row.f_start_error = (f.values[0] - Complex64::new(1.0, 0.0)).norm();
        row.f_end_error = f.values.last().unwrap().norm();
        w.csv_with(&format!("f_gamma_{label}.csv"), |b| f.write_csv(b))?;
        series.push(Series {
            label: format!("Re f, γ = {label}"),
            points: grid.nodes().into_iter().zip(f.values.iter().map(|z| z.re)).collect(),
            dashed: false,
        });
        series.push(Series {
            label: format!("Im f, γ = {label}"),
            points: grid.nodes().into_iter().zip(f.values.iter().map(|z| z.im)).collect(),
            dashed: true,
        });
        if gamma.is_finite() {
            let noise = sample_exponential_noise(gamma, &grid, cfg.master_seed)?;
            w.csv_with(&format!("noise_gamma_{label}.csv"), |b| noise.write_csv(b))?;
            let h = h_exponential(t, &cfg.params, gamma, &noise)?;
            row.h_start_error = Some(h.values[0].norm());
            row.h_end_error = Some(h.values.last().unwrap().norm());
            w.csv_with(&format!("h_gamma_{label}.csv"), |b| h.write_csv(b))?;
            if cfg.grid_n <= NUMERIC_MAX_N {
                let kernel = CorrelationKernel::exponential(gamma)?;
                let bvp = KernelBvp::new(&kernel, &cfg.params, &grid, NumericOptions::default())?;
                let fnum = bvp.solve_f()?;
                let hnum = bvp.solve_h(&noise)?;
                row.f_numeric_rel = Some(rel_sup(&f, &fnum));
                row.h_numeric_rel = Some(rel_sup(&h, &hnum));
                row.f_residual = Some(bvp.residual(&fnum.values, None)?);
                row.h_residual = Some(bvp.residual(&hnum.values, Some(&noise))?);
                row.condition = Some(bvp.condition());
                w.csv_with(&format!("f_numeric_gamma_{label}.csv"), |b| fnum.write_csv(b))?;
                w.csv_with(&format!("h_numeric_gamma_{label}.csv"), |b| hnum.write_csv(b))?;
            }
        }
        rows.push(row);
    }
    for r in &rows {
        let h_bc = r.h_start_error.unwrap_or(0.0).max(r.h_end_error.unwrap_or(0.0));
        let bc = r.f_start_error.max(r.f_end_error).max(h_bc);
        out.check(&format!("boundary values (γ = {})", r.gamma), bc <= 1e-10, format!("max {bc:.3e} (≤ 1e-10)"));
        if let (Some(a), Some(b)) = (r.f_numeric_rel, r.h_numeric_rel) {
            out.check(
                &format!("closed form vs numeric (γ = {})", r.gamma),
                a <= 1e-4 && b <= 1e-4,
                format!("f {a:.3e}, h {b:.3e} (≤ 1e-4)"),
            );
        }
        if let (Some(a), Some(b)) = (r.f_residual, r.h_residual) {
            out.check(
                &format!("numeric residual (γ = {})", r.gamma),
                a <= 1e-8 && b <= 1e-8,
                format!("f {a:.3e}, h {b:.3e} (≤ 1e-8)"),
            );
        }
    }
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.gamma.clone(),
                num(r.f_start_error),
                num(r.f_end_error),
                opt(r.h_start_error),
                opt(r.h_end_error),
                opt(r.f_numeric_rel),
                opt(r.h_numeric_rel),
                opt(r.f_residual),
                opt(r.h_residual),
                opt(r.condition),
            ]
        })
        .collect();
    let mut w = Writer { cfg, out: &mut out };
    w.table(
        "kernels.csv",
        &[
            "gamma",
            "f_start_error",
            "f_end_error",
            "h_start_error",
            "h_end_error",
            "f_numeric_rel",
            "h_numeric_rel",
            "f_residual",
            "h_residual",
            "condition",
        ],
        &table,
    )?;
    w.json("kernels.json", &json!({ "params": params_json(cfg), "t": t, "N": cfg.grid_n, "rows": rows }))?;
    w.svg(
        "kernels.svg",
        Plot {
            title: format!("Kernel f on [0, {t}]"),
            x_label: "s".into(),
            y_label: "f(s)".into(),
            x_log: false,
            y_log: false,
            series,
        },
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct OracleRow {
    #[serde(flatten)]
    report: OracleReport,
    relative_error: [f64; 5],
}

pub fn cmd_oracle_check(cfg: &RunConfig) -> Result<Outcome> {
    let gamma = single_finite_gamma(cfg, "oracle-check")?;
    ensure_out_dir(cfg)?;
    let t = cfg.t_max;
    let grid = make_grid(t, cfg.grid_n)?;
    let noise = sample_exponential_noise(gamma, &grid, cfg.master_seed)?;
    let f = f_exponential(t, &cfg.params, gamma, &grid)?;
    let h = h_exponential(t, &cfg.params, gamma, &noise)?;
    let reference = greens_coefficients(&f, &h, &noise, &cfg.params)?;
    let kernel = CorrelationKernel::exponential(gamma)?;
    let mut rows = Vec::new();
    for n in ORACLE_SLICES {
        let report = polygonal_report(&cfg.params, &kernel, &noise, t, n)?;
        let g = report.greens.expect("oracle reports carry coefficients");
        let a = g.as_array();
        let b = reference.as_array();
        let relative_error = std::array::from_fn(|k| {
            let scale = b[k].norm();
            if scale > 0.0 {
                (a[k] - b[k]).norm() / scale
            } else {
                (a[k] - b[k]).norm()
            }
        });
        rows.push(OracleRow { report, relative_error });
    }
    let worst: Vec<f64> = rows.iter().map(|r| r.relative_error.iter().cloned().fold(0.0, f64::max)).collect();
    let mut out = Outcome::default();
    let monotone = worst.windows(2).all(|w| w[1] < w[0]);
    out.check(
        "oracle error decreases with N",
        monotone,
        worst.iter().zip(ORACLE_SLICES).map(|(e, n)| format!("N={n}: {e:.3e}")).collect::<Vec<_>>().join(", "),
    );
    let last = *worst.last().unwrap();
    out.check("oracle agreement at N = 512", last <= 1e-3, format!("max rel {last:.3e} (≤ 1e-3)"));

    let mut w = Writer { cfg, out: &mut out };
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.report.n.to_string()];
            v.extend(r.relative_error.iter().map(|e| num(*e)));
            v.push(num(r.report.probe_residual));
            v.push(num(r.report.condition));
            v
        })
        .collect();
    w.table(
        "oracle_check.csv",
        &["N", "rel_A", "rel_B", "rel_C", "rel_D", "rel_E", "probe_residual", "condition"],
        &table,
    )?;
    let reference_record: GreensRecord = reference.record();
    w.json(
        "oracle_check.json",
        &json!({ "params": params_json(cfg), "gamma": gamma, "seed": cfg.master_seed, "reference": reference_record, "rows": rows }),
    )?;
    w.svg(
        "oracle_check.svg",
        Plot {
            title: "Oracle vs closed-form coefficients".into(),
            x_label: "N".into(),
            y_label: "max relative error".into(),
            x_log: true,
            y_log: true,
            series: vec![Series {
                label: "max over A..E".into(),
                points: ORACLE_SLICES.iter().map(|&n| n as f64).zip(worst.iter().copied()).collect(),
                dashed: false,
            }],
        },
    )?;
    Ok(out)
}

use std::fs;
use std::path::Path;
use std::process::Command;

use nmsse::UnitMode;
use nmsse_cli::commands::{cmd_ensemble, cmd_figure1, cmd_kernels, cmd_oracle_check, cmd_spread};
use nmsse_cli::config::{parse_config, Formats, RunConfig, TimeSpacing};
use nmsse_cli::svg::{Plot, Series};

const MINIMAL: &str = "m = 1\nlambda = 0.1\ngamma = 10\nt_max = 2\nsigma0 = 1\n";

fn with_out(text: &str, dir: &Path) -> RunConfig {
    let mut cfg = parse_config(text).unwrap();
    cfg.out_dir = dir.to_path_buf();
    cfg
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn minimal_file_gets_defaults() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.params.unit_mode(), UnitMode::Scaled);
    assert_eq!(cfg.grid_n, 2001);
    assert_eq!(cfg.n_times, 50);
    assert_eq!(cfg.n_traj, 1);
    assert_eq!(cfg.master_seed, 42);
    assert_eq!(cfg.gammas, vec![10.0]);
    assert_eq!(cfg.time_spacing, TimeSpacing::Linear);
    assert_eq!(cfg.formats, Formats::Csv);
    assert!(cfg.plot);
    assert_eq!(cfg.params.hbar(), 1.0);
}

#[test]
fn negative_lambda_rejected() {
    let e = parse_config(&MINIMAL.replace("lambda = 0.1", "lambda = -1")).unwrap_err();
    assert_eq!(e.key.as_deref(), Some("lambda"));
    assert_eq!(e.line, Some(2));
}

#[test]
fn missing_required_key_is_named() {
    for key in ["m", "lambda", "gamma", "t_max", "sigma0"] {
        let text: String = MINIMAL.lines().filter(|l| !l.starts_with(&format!("{key} "))).map(|l| format!("{l}\n")).collect();
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.key.as_deref(), Some(key), "{e}");
        assert!(e.to_string().contains(key));
    }
}

#[test]
fn malformed_number_reports_line() {
    let e = parse_config("m = 1\n# comment\nlambda = 0.1x\ngamma = 1\nt_max = 1\nsigma0 = 1\n").unwrap_err();
    assert_eq!(e.line, Some(3));
    assert!(e.to_string().starts_with("line 3:"), "{e}");
}

#[test]
fn unknown_and_duplicate_keys_rejected() {
    let e = parse_config(&format!("{MINIMAL}colour = blue\n")).unwrap_err();
    assert_eq!((e.line, e.key.as_deref()), (Some(6), Some("colour")));
    let e = parse_config(&format!("{MINIMAL}m = 2\n")).unwrap_err();
    assert_eq!((e.line, e.key.as_deref()), (Some(6), Some("m")));
}

#[test]
fn comments_and_blank_lines_ignored() {
    let text = "# run\n\n  m = 1   # kg\nlambda=0.1\n gamma = 10\nt_max = 2\nsigma0 = 1\n";
    assert_eq!(parse_config(text).unwrap().params.lambda(), 0.1);
}

#[test]
fn si_file_with_several_gammas_accepted() {
    let cfg = parse_config("unit_mode = si\nm = 1\nlambda = 1e-2\nsigma0 = 1\ngamma = 2, 10, inf\nt_max = 1e3\n").unwrap();
    assert_eq!(cfg.params.unit_mode(), UnitMode::Si);
    assert_eq!(cfg.gammas[..2], [2.0, 10.0]);
    assert!(cfg.gammas[2].is_infinite());
    assert!((cfg.params.hbar() - 1.054_571_817e-34).abs() < 1e-43);
}

#[test]
fn log_spacing_needs_t_min() {
    let e = parse_config(&format!("{MINIMAL}time_spacing = log\n")).unwrap_err();
    assert_eq!(e.key.as_deref(), Some("t_min"));
}

#[test]
fn sample_times_cover_horizon() {
    let cfg = parse_config(&format!("{MINIMAL}n_times = 4\n")).unwrap();
    assert_eq!(cfg.sample_times(), vec![0.5, 1.0, 1.5, 2.0]);
    let cfg = parse_config(&format!("{MINIMAL}n_times = 3\nt_min = 0.02\ntime_spacing = log\n")).unwrap();
    let t = cfg.sample_times();
    assert!((t[0] - 0.02).abs() < 1e-15 && (t[1] - 0.2).abs() < 1e-15 && t[2] == 2.0);
}

#[test]
fn spread_without_collapse_is_free_dispersion() {
    let dir = tempfile::tempdir().unwrap();
    let sigma0 = 0.7;
    let cfg = with_out(&format!("m = 2\nlambda = 0\ngamma = 10\nt_max = 5\nsigma0 = {sigma0}\nn_times = 20\n"), dir.path());
    let out = cmd_spread(&cfg).unwrap();
    assert!(out.all_pass());
    let rows = read_rows(&dir.path().join("spread.csv"));
    assert_eq!(rows.len(), 20);
    for r in rows {
        let t: f64 = r[1].parse().unwrap();
        let s: f64 = r[2].parse().unwrap();
        // sqrt(σ0² + (ħt/(2mσ0))²) with ħ = 1, m = 2
        let want = (sigma0 * sigma0 + (t / (4.0 * sigma0)).powi(2)).sqrt();
        assert!((s - want).abs() <= 1e-12 * want, "t={t}: {s} vs {want}");
        assert_eq!(r[3], "inf");
    }
}

#[test]
fn kernels_without_collapse_are_linear() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_out("m = 1\nlambda = 0\ngamma = 3\nt_max = 1.5\nsigma0 = 1\nN = 101\n", dir.path());
    let out = cmd_kernels(&cfg).unwrap();
    assert!(out.all_pass(), "{:?}", out.checks);
    let rows = read_rows(&dir.path().join("f_gamma_3.csv"));
    let nodes: Vec<_> = rows.iter().filter(|r| !r[0].starts_with('d')).collect();
    assert_eq!(nodes.len(), 101);
    for r in nodes {
        let s: f64 = r[0].parse().unwrap();
        let re: f64 = r[1].parse().unwrap();
        let im: f64 = r[2].parse().unwrap();
        assert!((re - (1.0 - s / 1.5)).abs() < 1e-13 && im.abs() < 1e-13, "s={s}");
    }
}

#[test]
fn oracle_report_converges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_out("m = 1\nlambda = 0.1\ngamma = 10\nt_max = 1\nsigma0 = 1\nN = 1025\nformat = both\n", dir.path());
    let out = cmd_oracle_check(&cfg).unwrap();
    assert!(out.all_pass(), "{:?}", out.checks);
    let rows = read_rows(&dir.path().join("oracle_check.csv"));
    let ns: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ns, ["64", "128", "256", "512"]);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("oracle_check.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn outputs_are_byte_identical() {
    let text = "m = 1\nlambda = 0.2\ngamma = 5\nt_max = 1\nsigma0 = 1\nN = 257\nn_times = 5\nn_traj = 8\nformat = both\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let cfg = with_out(text, dir);
        cmd_ensemble(&cfg).unwrap();
        cmd_kernels(&cfg).unwrap();
        cmd_spread(&cfg).unwrap();
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 14);
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn ensemble_json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_out("m = 1\nlambda = 0.1\ngamma = 1\nt_max = 1\nsigma0 = 1\nN = 129\nn_times = 4\nn_traj = 6\nformat = both\n", dir.path());
    cmd_ensemble(&cfg).unwrap();
    let rows = read_rows(&dir.path().join("ensemble.csv"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("ensemble.json")).unwrap()).unwrap();
    for (k, r) in rows.iter().enumerate() {
        let q: f64 = r[1].parse().unwrap();
        assert_eq!(q, json["mean_q"][k].as_f64().unwrap());
    }
}

#[test]
fn ensemble_needs_one_finite_gamma() {
    let dir = tempfile::tempdir().unwrap();
    for g in ["inf", "1, 2"] {
        let cfg = with_out(&MINIMAL.replace("gamma = 10", &format!("gamma = {g}")), dir.path());
        assert!(cmd_ensemble(&cfg).is_err());
    }
}

#[test]
fn format_and_plot_switches() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = with_out(&format!("{MINIMAL}n_times = 3\nformat = json\nplot = none\n"), dir.path());
    let out = cmd_spread(&cfg).unwrap();
    let names: Vec<_> = out.files.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_owned()).collect();
    assert_eq!(names, ["spread.json"]);
    cfg.formats = Formats::Csv;
    cfg.plot = true;
    let out = cmd_spread(&cfg).unwrap();
    assert_eq!(out.files.len(), 2);
}

#[test]
fn figure_preset_reports_claims() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::figure1();
    cfg.out_dir = dir.path().to_path_buf();
    let out = cmd_figure1(&cfg).unwrap();
    assert!(out.all_pass(), "{:?}", out.checks);
    assert_eq!(out.claims.len(), 5);
    let rows = read_rows(&dir.path().join("spread.csv"));
    assert_eq!(rows.len(), 4 * 201);
    let hit = rows.iter().find(|r| r[0] == "10" && (r[1].parse::<f64>().unwrap() / 1e-3 - 1.0).abs() < 1e-9);
    assert!(hit.is_some(), "γ = 10 row at t = 1e-3 s");
    let report = fs::read_to_string(dir.path().join("figure1_report.txt")).unwrap();
    assert_eq!(report.lines().filter(|l| l.starts_with("CLAIM")).count(), 5);
}

#[test]
fn svg_embeds_exact_data() {
    let plot = Plot {
        title: "a < b".into(),
        x_label: "x".into(),
        y_label: "y".into(),
        x_log: true,
        y_log: false,
        series: vec![Series { label: "s".into(), points: vec![(0.1, 1.0 / 3.0), (10.0, -2.5)], dashed: true }],
    };
    let text = plot.render();
    assert!(text.starts_with("<svg") && text.ends_with("</svg>\n"));
    assert!(text.contains("a &lt; b"));
    let data: Vec<(f64, f64)> = text
        .lines()
        .skip_while(|l| !l.starts_with("<!-- data: s"))
        .skip(1)
        .take_while(|l| *l != "-->")
        .map(|l| {
            let (x, y) = l.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    assert_eq!(data, vec![(0.1, 1.0 / 3.0), (10.0, -2.5)]);
    assert_eq!(text, plot.render());
}

fn nmsse(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nmsse")).args(args).current_dir(dir).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn exit_status_follows_checks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("ok.cfg"), "m = 1\nlambda = 0.1\ngamma = 10\nt_max = 1\nsigma0 = 1\nN = 401\nn_times = 5\n").unwrap();
    // too coarse for the closed-form vs numeric tolerance
    fs::write(d.join("coarse.cfg"), "m = 1\nlambda = 0.1\ngamma = 10\nt_max = 1\nsigma0 = 1\nN = 11\n").unwrap();
    fs::write(d.join("bad.cfg"), "m = 1\nlambda = -1\ngamma = 10\nt_max = 1\nsigma0 = 1\n").unwrap();

    let (code, stdout) = nmsse(&["spread", "--config", "ok.cfg", "--out", "a", "--format", "both", "--plot", "none"], d);
    assert_eq!(code, 0);
    assert!(stdout.contains("CHECK PASS"));
    assert!(d.join("a/spread.csv").exists() && d.join("a/spread.json").exists() && !d.join("a/spread.svg").exists());

    let (code, stdout) = nmsse(&["kernels", "--config", "coarse.cfg", "--out", "b"], d);
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("CHECK FAIL closed form vs numeric"));

    assert_eq!(nmsse(&["spread", "--config", "bad.cfg"], d).0, 2);
    assert_eq!(nmsse(&["spread"], d).0, 2);
    assert_eq!(nmsse(&["spread", "--config", "missing.cfg"], d).0, 2);

    let (code, stdout) = nmsse(&["figure1", "--out", "fig", "--plot", "none"], d);
    assert_eq!(code, 0);
    assert!(stdout.contains("CLAIM"));

    let (_, one) = nmsse(&["ensemble", "--config", "ok.cfg", "--out", "s1", "--seed", "9"], d);
    let (_, two) = nmsse(&["ensemble", "--config", "ok.cfg", "--out", "s2", "--seed", "9"], d);
    assert_eq!(one.replace("s1", ""), two.replace("s2", ""));
    assert_eq!(fs::read(d.join("s1/ensemble.csv")).unwrap(), fs::read(d.join("s2/ensemble.csv")).unwrap());
}

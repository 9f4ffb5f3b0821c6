use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nmsse_cli::{
    cmd_ensemble, cmd_figure1, cmd_kernels, cmd_oracle_check, cmd_spread, parse_config, Formats, Outcome, RunConfig,
};

#[derive(Parser)]
#[command(name = "nmsse", version, about = "Free-particle collapse dynamics with colored noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed (overrides `master_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    #[arg(long, global = true, value_enum)]
    plot: Option<PlotArg>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Noise-free spread σ(t) for each γ, with its asymptote.
    Spread,
    /// Monte Carlo averages of the trajectory moments.
    Ensemble,
    /// Dump f and h with boundary and residual diagnostics.
    Kernels,
    /// Compare the propagator coefficients with the time-sliced path integral.
    OracleCheck,
    /// Spread curves for the macroscopic preset (SI units, γ ∈ {2, 10, 100, ∞}).
    Figure1,
}

#[derive(ValueEnum, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

#[derive(ValueEnum, Clone, Copy)]
enum PlotArg {
    Svg,
    None,
}

fn load(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match (cli.command, &cli.config) {
        (Command::Figure1, None) => RunConfig::figure1(),
        (Command::Figure1, Some(_)) => return Err("figure1 uses a fixed preset and takes no --config".into()),
        (_, None) => return Err("--config is required".into()),
        (_, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(f) = cli.format {
        cfg.formats = match f {
            FormatArg::Csv => Formats::Csv,
            FormatArg::Json => Formats::Json,
            FormatArg::Both => Formats::Both,
        };
    }
    if let Some(p) = cli.plot {
        cfg.plot = matches!(p, PlotArg::Svg);
    }
    Ok(cfg)
}

fn report(out: &Outcome) {
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    for c in &out.checks {
        println!("CHECK {} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for c in &out.claims {
        println!("CLAIM {} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Spread => cmd_spread(&cfg),
        Command::Ensemble => cmd_ensemble(&cfg),
        Command::Kernels => cmd_kernels(&cfg),
        Command::OracleCheck => cmd_oracle_check(&cfg),
        Command::Figure1 => cmd_figure1(&cfg),
    };
    match result {
        Ok(out) => {
            report(&out);
            if out.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

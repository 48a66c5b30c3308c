//! Command-line entry point.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::experiments;
use crate::report::write_outputs;

#[derive(Debug, Parser)]
#[command(name = "halfheat", version, about = "Experiments for half-time-derivative parabolic operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Operator identities, coercivity and quadrature cross-validation.
    Identities(RunArgs),
    /// L2 estimate trials.
    L2(RunArgs),
    /// Lp ratio sweep with grid refinement.
    LpSweep(RunArgs),
    /// Decay of the cutoff commutators.
    TailDecay(RunArgs),
    /// Mean-oscillation decay and the local estimate.
    Oscillation(RunArgs),
    /// Small-oscillation checkers on generated coefficients.
    Assumptions(RunArgs),
    /// One iterative solve.
    Solve(RunArgs),
    /// One per-mode exact solve (constant coefficients).
    Oracle(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// TOML file overlaying the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `output.dir` of the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Time samples.
    #[arg(long)]
    nt: Option<usize>,
    /// Spatial samples, one value or one per axis.
    #[arg(long, value_delimiter = ',')]
    nx: Option<Vec<usize>>,
    /// Time period.
    #[arg(long)]
    lt: Option<f64>,
    /// Spatial periods, one value or one per axis.
    #[arg(long, value_delimiter = ',')]
    lx: Option<Vec<f64>>,
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Self::Identities(a) => (ExperimentKind::Identities, a),
            Self::L2(a) => (ExperimentKind::L2, a),
            Self::LpSweep(a) => (ExperimentKind::LpSweep, a),
            Self::TailDecay(a) => (ExperimentKind::TailDecay, a),
            Self::Oscillation(a) => (ExperimentKind::Oscillation, a),
            Self::Assumptions(a) => (ExperimentKind::Assumptions, a),
            Self::Solve(a) => (ExperimentKind::Solve, a),
            Self::Oracle(a) => (ExperimentKind::Oracle, a),
        }
    }
}

fn build_config(kind: ExperimentKind, args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(kind, path)?,
        None => ExperimentConfig::default_for(kind),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(n) = args.nt {
        cfg.grid.n_t = n;
    }
    if let Some(n) = &args.nx {
        cfg.grid.n_x = n.clone();
    }
    if let Some(l) = args.lt {
        cfg.grid.l_t = l;
    }
    if let Some(l) = &args.lx {
        cfg.grid.l_x = l.clone();
    }
    if let Some(o) = &args.out {
        cfg.output.dir = o.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn failure(msg: String) -> i32 {
    eprintln!("error: {msg}");
    println!("{}", json!({ "passed": false, "failures": [msg] }));
    1
}

fn init_threads() {
    if let Some(n) = std::env::var("HALFHEAT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // A second initialisation in the same process is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Runs the CLI; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            return failure(e.to_string().trim_end().to_string());
        }
    };
    init_threads();
    let (kind, args) = cli.command.split();
    let cfg = match build_config(kind, &args) {
        Ok(c) => c,
        Err(e) => return failure(format!("{e:#}")),
    };
    let outcome = match experiments::run(&cfg) {
        Ok(o) => o,
        Err(e) => return failure(format!("{e:#}")),
    };
    let dir = PathBuf::from(&cfg.output.dir);
    if let Err(e) = write_outputs(&dir, &cfg, &outcome) {
        return failure(format!("{e:#}"));
    }
    println!(
        "{}",
        json!({
            "experiment": cfg.experiment,
            "passed": outcome.passed(),
            "failures": outcome.failures,
            "out": dir.display().to_string(),
        })
    );
    if outcome.passed() {
        0
    } else {
        1
    }
}

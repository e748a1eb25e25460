//! `quasispec`: reproducible experiments for continuum quasi-periodic
//! Schrödinger operators. Every command reads one JSON config and writes
//! CSV/JSON artifacts stamped with the config fingerprint.

mod artifacts;
mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quasispec_core::find_rational_dependence;

use crate::artifacts::Artifacts;
use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "quasispec", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lyapunov exponent on the energy grid (lyapunov.csv)
    Lyapunov(RunArgs),
    /// m-function at one energy for every base point (mfun.csv)
    Mfun(RunArgs),
    /// Measure of the small-Lyapunov set in [-R, R] (mr.json, mr_flags.csv)
    Mr(RunArgs),
    /// Integral of M_R over the coupling (coupling.json, coupling.csv)
    Coupling(RunArgs),
    /// Box-step perturbation with every checkable property verified
    Perturb(RunArgs),
    /// Decomposition and periodicity checks on an itinerary (pieces_report.json)
    Pieces(RunArgs),
    /// Mollification distance table (mollify.csv)
    Mollify(RunArgs),
    /// Mollified box-step sweep of distances and M_R (semicontinuity.csv)
    DemoSemicontinuity(RunArgs),
    /// Print the default config with every field spelled out
    DefaultConfig,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON experiment config; omitted fields take their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; never changes the artifacts
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides lyapunov.seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numeric(m) => write!(f, "numeric failure: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<quasispec_core::Error> for Failure {
    fn from(e: quasispec_core::Error) -> Self {
        use quasispec_core::Error::*;
        match e {
            InvalidArgument(_) | DimensionMismatch { .. } | NotContinuous => Failure::Config(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Runner = fn(&ExperimentConfig, &str, &mut Artifacts) -> Result<(), Failure>;

fn run(runner: Runner, args: &RunArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.lyapunov.seed = seed;
    }
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let fingerprint = cfg.fingerprint();
    let mut out = Artifacts::new(dir, fingerprint.clone());

    let mut body = || -> Result<(), Failure> {
        let relation = find_rational_dependence(cfg.flow.alpha(), cfg.minimality.bound, cfg.minimality.tol)?;
        if let Some(k) = &relation {
            eprintln!("quasispec: warning: alpha satisfies the integer relation k = {k:?}; the flow is not minimal");
        }
        runner(&cfg, &fingerprint, &mut out)?;
        let mut resolved = serde_json::to_value(&cfg).expect("config serializes");
        resolved["flow_relation"] = serde_json::to_value(&relation).expect("relation serializes");
        out.write_json_value("config.resolved.json", resolved)
    };
    let result = match args.workers {
        Some(0) => Err(Failure::Config("--workers must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Failure::Config(e.to_string()))
            .and_then(|pool| pool.install(body)),
        None => body(),
    };
    if result.is_err() {
        out.discard();
    }
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (runner, args): (Runner, &RunArgs) = match &cli.command {
        Command::Lyapunov(a) => (commands::lyapunov, a),
        Command::Mfun(a) => (commands::mfun, a),
        Command::Mr(a) => (commands::mr, a),
        Command::Coupling(a) => (commands::coupling, a),
        Command::Perturb(a) => (commands::perturb, a),
        Command::Pieces(a) => (commands::pieces, a),
        Command::Mollify(a) => (commands::mollify, a),
        Command::DemoSemicontinuity(a) => (commands::demo_semicontinuity, a),
        Command::DefaultConfig => {
            println!("{}", ExperimentConfig::default().to_json());
            return ExitCode::SUCCESS;
        }
    };
    match run(runner, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("quasispec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! `hrg`: command-line driver for the hierarchical RG laboratory.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{Backend, FieldError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "hrg", version, about = "Hierarchical p-adic phi^4 model: RG map, correlators, checks")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags overriding the TOML config, accepted before or after the subcommand.
#[derive(Args, Debug)]
struct Overrides {
    /// TOML run config; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    p: Option<u32>,
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Block scale exponent: one RG step integrates l layers.
    #[arg(long, global = true)]
    l: Option<u32>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    eps: Option<f64>,
    /// Window top layer: leaves are unit balls inside B(0, p^S).
    #[arg(long = "S", global = true, allow_negative_numbers = true)]
    s: Option<i32>,
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    #[arg(long, global = true)]
    phimax: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    g: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// CSV of layer,index,g,mu rows overriding the couplings under a ball.
    #[arg(long, global = true)]
    couplings: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    #[arg(long, global = true)]
    mc_samples: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,
    /// Worker threads (default 1, reproducible).
    #[arg(long, global = true, env = "HRG_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Solve RG F* = F* and dump the fixed point.
    Fixpoint(commands::FixpointArgs),
    /// Scaling dimensions at the fixed point.
    Exponents(commands::ExponentsArgs),
    /// Bisect the critical mass at fixed g.
    Tune(commands::TuneArgs),
    /// Iterate the RG map from exp(-g:φ⁴: - μ:φ²:).
    Flow(commands::FlowArgs),
    /// Exact correlation functions on a window by tree dynamic programming.
    Correlate(commands::CorrelateArgs),
    /// Monte Carlo estimates of two-point functions.
    Sample(commands::SampleArgs),
    /// Randomized checks of the exact ultrametric and Möbius identities.
    ConformalCheck(commands::ConformalArgs),
    /// Reflection-positivity Gram matrix of the Gaussian kernel.
    OsCheck(commands::OsArgs),
    /// Invariance of the elliptic integral along the AGM iteration.
    Agm(commands::AgmArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fixpoint(_) => "fixpoint",
            Command::Exponents(_) => "exponents",
            Command::Tune(_) => "tune",
            Command::Flow(_) => "flow",
            Command::Correlate(_) => "correlate",
            Command::Sample(_) => "sample",
            Command::ConformalCheck(_) => "conformal-check",
            Command::OsCheck(_) => "os-check",
            Command::Agm(_) => "agm",
        }
    }
}

/// Failures mapped to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Core(#[from] hrg_core::Error),
    #[error("{0}")]
    Input(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use hrg_core::Error as E;
        match self {
            CliError::Field(_) | CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Core(E::Config(_) | E::Parse(_) | E::Domain(_) | E::Unsupported(_) | E::Bracket(_)) => 2,
            CliError::Core(_) => 3,
            CliError::Check(_) => 4,
        }
    }
}

fn resolve(o: &Overrides) -> Result<(RunConfig, usize), CliError> {
    let mut cfg = match &o.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($f:ident => $t:ident),*) => {
            $(if let Some(v) = o.$f.clone() { cfg.$t = v; })*
        };
    }
    set!(p => p, d => d, l => l, eps => eps, s => s, grid_n => grid_n, phimax => phimax, g => g, mu => mu,
         seed => seed, backend => backend, mc_samples => mc_samples);
    if o.couplings.is_some() {
        cfg.couplings = o.couplings.clone();
    }
    if o.output.is_some() {
        cfg.output = o.output.clone();
    }
    let threads = o.threads.unwrap_or(1);
    if threads == 0 {
        return Err(FieldError {
            field: "threads",
            message: "must be >= 1".into(),
        }
        .into());
    }
    cfg.validate()?;
    Ok((cfg, threads))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (cfg, threads) = resolve(&cli.overrides)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    let header = output::Header {
        command: cli.command.name(),
        args: serde_json::to_value(&cli.command).expect("arguments serialize")[cli.command.name()].clone(),
        config: &cfg,
    };
    match &cli.command {
        Command::Fixpoint(a) => commands::fixpoint(&cfg, &header, a),
        Command::Exponents(a) => commands::exponents(&cfg, &header, a),
        Command::Tune(a) => commands::tune(&cfg, &header, a),
        Command::Flow(a) => commands::flow(&cfg, &header, a),
        Command::Correlate(a) => commands::correlate(&cfg, &header, a),
        Command::Sample(a) => commands::sample(&cfg, &header, a),
        Command::ConformalCheck(a) => commands::conformal_check(&cfg, &header, a),
        Command::OsCheck(a) => commands::os_check(&cfg, &header, a),
        Command::Agm(a) => commands::agm(&cfg, &header, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hrg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

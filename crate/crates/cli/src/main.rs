//! `gbpf`: validity checks, simulation and analysis from JSON configs.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("validity check failed: {0}")]
    Validity(String),
    #[error(transparent)]
    Core(#[from] gbpf_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use gbpf_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Validity(_) => 1,
            CliError::Io(_) => 3,
            CliError::Core(e) => match e {
                E::InvalidCovariance(_) => 1,
                E::NegativeGapProbability { .. }
                | E::RejectionCapExceeded { .. }
                | E::Quadrature { .. }
                | E::LatticeBudget { .. } => 3,
                _ => 2,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "gbpf", version, about = "Stationary processes and random fields with prescribed marginals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the covariance validity conditions.
    Check(CommonArgs),
    /// Simulate a latent binary sequence.
    SimulateGbp(CommonArgs),
    /// Simulate a process with a prescribed marginal.
    SimulateProcess(CommonArgs),
    /// Simulate a random field on a lattice.
    SimulateField(CommonArgs),
    /// Lagged covariances of a simulated series or field.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Skip the validity gate; sampling still fails on negative gap probabilities.
    #[arg(long)]
    pub unchecked: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// CSV written by a simulate command.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Per-axis lag window for fields, e.g. `25,25`.
    #[arg(long, value_delimiter = ',')]
    pub window: Option<Vec<usize>>,
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("GBPF_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("GBPF_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(CliError::Usage("GBPF_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = init_threads().and_then(|_| match cli.command {
        Command::Check(a) => commands::check(&a),
        Command::SimulateGbp(a) => commands::simulate_gbp(&a),
        Command::SimulateProcess(a) => commands::simulate_process(&a),
        Command::SimulateField(a) => commands::simulate_field(&a),
        Command::Analyze(a) => commands::analyze(&a),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

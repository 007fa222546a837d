mod commands;
mod config;
mod error;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (config schema 1)");

/// Validation study design and analysis for error-prone exposures.
#[derive(Debug, Parser)]
#[command(name = "twophase", version = VERSION, about)]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "TWOPHASE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select a validation subset from the error-prone exposures.
    Design(DesignArgs),
    /// Fit the analysis models on partially validated data.
    Analyze(AnalyzeArgs),
    /// Run a Monte Carlo design comparison from a config file.
    Simulate(SimulateArgs),
    /// Inject measurement error into a dataset and compare designs.
    Study(StudyArgs),
    /// Write the synthetic surrogate dataset and its schema.
    Surrogate(SurrogateArgs),
    /// Re-run a command from its manifest and verify the outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    Srs,
    EtsVar,
    EtsPc1,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DesignArgs {
    /// CSV with the error-prone exposures.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON schema naming the columns; without it, `*_star` columns are used.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// 1-based exposure to sample on, for `ets-var`.
    #[arg(long)]
    pub target: Option<usize>,
    /// Validation subset size.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "TWOPHASE_OUT_DIR")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Single,
    Multiple,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Selection CSV from `design`; otherwise the schema's validation column.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    /// Design JSON from `design`.
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Single)]
    pub method: MethodArg,
    /// Number of imputations for `--method multiple`.
    #[arg(long, default_value_t = 75)]
    pub m: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "TWOPHASE_OUT_DIR")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// TOML simulation config.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's replicate count.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, env = "TWOPHASE_OUT_DIR")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct StudyArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Validation subset size.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 75)]
    pub imputations: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Error variance as a fraction of each exposure's sample variance.
    #[arg(long, conflicts_with = "error_variances")]
    pub error_fraction: Option<f64>,
    /// Explicit comma-separated error variances, one per exposure.
    #[arg(long, value_delimiter = ',')]
    pub error_variances: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "TWOPHASE_OUT_DIR")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SurrogateArgs {
    #[arg(long, default_value_t = twophase::study::SURROGATE_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = twophase::study::SURROGATE_ROWS)]
    pub n: usize,
    #[arg(long, env = "TWOPHASE_OUT_DIR")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// `manifest.json` written by an earlier run.
    pub manifest: PathBuf,
    /// Where to write the replayed outputs; defaults to the manifest's directory.
    #[arg(long, env = "TWOPHASE_OUT_DIR")]
    pub out: Option<PathBuf>,
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    match threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure threads: {e}"))),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Design(a) => commands::design::run(&a).map(|_| ()),
        Command::Analyze(a) => commands::analyze::run(&a).map(|_| ()),
        Command::Simulate(a) => commands::simulate::run(&a).map(|_| ()),
        Command::Study(a) => commands::study::run(&a).map(|_| ()),
        Command::Surrogate(a) => commands::surrogate::run(&a).map(|_| ()),
        Command::Replay(a) => commands::replay::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `factrf`: feature significance tests, simulations, baseline importance
//! and rolling-window analysis from the command line.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 numerical
//! failure (for example every tested feature degenerate).

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use factrf::importance::ImportanceMethod;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "factrf", version, about = "Random-forest feature significance testing")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// JSON configuration (FACT settings, or an experiment list for `simulate`).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Root seed; overrides the seed in the configuration.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Flag features passing Benjamini-Hochberg at this FDR level.
    #[arg(long, global = true, value_name = "Q")]
    pub fdr: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test features of a CSV dataset.
    Test(TestArgs),
    /// Run the experiments listed in --config.
    Simulate,
    /// MDI / MDA / CPI scores for every feature of a CSV dataset.
    Importance(ImportanceArgs),
    /// FACT p-values in rolling windows of a time-ordered CSV.
    Rolling(RollingArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV (comma-separated, header row).
    pub csv: PathBuf,
    /// Response column.
    #[arg(long, short = 'y')]
    pub response: String,
    /// Columns that are neither response nor feature (identifiers, dates).
    #[arg(long, value_delimiter = ',')]
    pub skip: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Feature columns to test (default: all).
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Methods to compute: MDI, MDA, CPI.
    #[arg(long, value_delimiter = ',', default_value = "MDI,MDA,CPI")]
    pub methods: Vec<ImportanceMethod>,
    /// Permutations per feature for MDA and CPI.
    #[arg(long, default_value_t = factrf::importance::DEFAULT_REPS)]
    pub reps: usize,
}

#[derive(Debug, Args)]
pub struct RollingArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Date column; values must be strictly increasing.
    #[arg(long)]
    pub date: String,
    #[arg(long)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    /// Rows between the features and the response they predict.
    #[arg(long, default_value_t = 1)]
    pub horizon: usize,
    /// Feature columns to test (default: all).
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FACT_LOG", "warn"))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.global.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
    }
    if let Some(q) = cli.global.fdr {
        if !(q > 0.0 && q < 1.0) {
            return Err(CliError::Usage(format!("--fdr {q} must lie strictly between 0 and 1")));
        }
    }
    match &cli.command {
        Command::Test(args) => commands::test(&cli.global, args),
        Command::Simulate => commands::simulate(&cli.global),
        Command::Importance(args) => commands::importance(&cli.global, args),
        Command::Rolling(args) => commands::rolling(&cli.global, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

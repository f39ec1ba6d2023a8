//! Experiment runner: reproduces each ensemble protocol end to end from a
//! plain-text config, emitting CSV reports and plot-ready data.
//!
//! Exit codes: 0 success, 2 config error, 3 runtime error.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pointens", version, about = "Ensemble experiments on point-set classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset file.
    GenData(CommonArgs),
    /// Train instances on the full training set and sweep ensemble size K.
    SimpleEnsemble(CommonArgs),
    /// Bagging with and without replacement against the simple ensemble.
    Bagging(CommonArgs),
    /// Constrained grid search over cross-architecture mixing weights.
    WeightSearch(CommonArgs),
    /// Isolate the random factors of training across the 2^3 seed grid.
    RandomFactors(CommonArgs),
    /// Retrain classifier heads on frozen encoders and ensemble them.
    HeadEnsemble(CommonArgs),
    /// Train the three-stage detector and compare ensembling modes.
    Frustum(CommonArgs),
    /// Parameter counts and batch inference timing per architecture.
    Timing(CommonArgs),
}

/// Options shared by every subcommand.
#[derive(Args, Clone)]
pub struct CommonArgs {
    /// Configuration file: `key = value` lines, `#` comments.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for reports and artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed; every experiment stream derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for independent trainings (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

/// Errors split by exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl From<pointens::Error> for CliError {
    fn from(e: pointens::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult = Result<(), CliError>;

fn dispatch(command: &Command) -> CliResult {
    let args = match command {
        Command::GenData(a)
        | Command::SimpleEnsemble(a)
        | Command::Bagging(a)
        | Command::WeightSearch(a)
        | Command::RandomFactors(a)
        | Command::HeadEnsemble(a)
        | Command::Frustum(a)
        | Command::Timing(a) => a,
    };
    let run = || match command {
        Command::GenData(a) => commands::gen_data::run(a),
        Command::SimpleEnsemble(a) => commands::simple_ensemble::run(a),
        Command::Bagging(a) => commands::bagging::run(a),
        Command::WeightSearch(a) => commands::weight_search::run(a),
        Command::RandomFactors(a) => commands::random_factors::run(a),
        Command::HeadEnsemble(a) => commands::head_ensemble::run(a),
        Command::Frustum(a) => commands::frustum::run(a),
        Command::Timing(a) => commands::timing::run(a),
    };
    match args.jobs {
        None => run(),
        Some(n) => {
            if n == 0 {
                return Err(CliError::Config("--jobs must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            pool.install(run)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

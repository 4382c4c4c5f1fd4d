//! `polarshape` command-line harness.

mod dataset;
mod eval;
mod profile;
mod synth;
mod table;
mod tta;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use polarshape::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "polarshape", version, about = "Polar occupancy evaluation, test-time search and synthetic suites")]
struct Cli {
    /// Run configuration (`key = value` lines, `#` comments).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Log progress and write per-hypothesis score tables.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every case of a dataset and write metrics.csv.
    Eval(DatasetArgs),
    /// Compare identity-frame and test-time-searched predictions; write tta.csv.
    Tta(DatasetArgs),
    /// Generate a seeded synthetic dataset with a manifest.
    Synth(SynthArgs),
    /// Write the angular rim profile of one case as rim_profile.csv.
    Profile(ProfileArgs),
}

#[derive(Args, Debug)]
struct DatasetArgs {
    /// Directory holding one subdirectory per case.
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = PredictorKind::Masks)]
    predictor: PredictorKind,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Number of cases.
    #[arg(long)]
    count: usize,
    /// Suite seed; case i uses a seed derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory to create the dataset in.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    /// Case directory.
    case: PathBuf,
    #[arg(long, value_enum, default_value_t = PredictorKind::Masks)]
    predictor: PredictorKind,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Where predicted masks come from.
#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorKind {
    /// Ground-truth oracle rebuilt from the case's `case.cfg`.
    Oracle,
    /// Image-driven intensity heuristic.
    Toy,
    /// `disc_pred.pgm` and `cup_pred.pgm` already in the case directory.
    Masks,
}

impl PredictorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Toy => "toy",
            Self::Masks => "masks",
        }
    }
}

/// Bad invocation or configuration; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Print a command summary; a closed stdout (e.g. `| head`) is not an error.
pub fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => match std::fs::read_to_string(p) {
            Err(e) => Err(UsageError(format!("cannot read config {}: {e}", p.display())).into()),
            Ok(text) => text.parse().map_err(|e| UsageError(format!("config {}: {e}", p.display())).into()),
        },
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("building worker pool")?;
    pool.install(|| match cli.command {
        Command::Eval(a) => eval::run(&a.dataset, a.predictor, &a.out, &config),
        Command::Tta(a) => tta::run(&a.dataset, a.predictor, &a.out, &config, cli.verbose),
        Command::Synth(a) => synth::run(a.count, a.seed, &a.out, &config),
        Command::Profile(a) => profile::run(&a.case, a.predictor, &a.out, &config),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_DATA)
            }
        }
    }
}

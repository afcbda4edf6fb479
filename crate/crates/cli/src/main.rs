//! `robustmv`: solve, classify, simulate and check robust mean-variance
//! instances described by a JSON model file.
//!
//! Exit codes: 0 success, 1 input error, 2 verification failure,
//! 3 no worst case exists (tied leading Sharpe ratios or zero drift).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use robustmv_core::Error;

use crate::config::LoadedConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Flagged(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Flagged(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoMinimum(_) | Error::ZeroDrift => CliError::Flagged(format!("{e}: the worst-case problem has no minimizer")),
            Error::SaddleViolated { .. } | Error::PrincipleViolated { .. } | Error::NonConvergence { .. } => {
                CliError::Verification(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "robustmv", version, about = "Robust mean-variance portfolios under drift and correlation ambiguity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Worst-case parameters and the robust strategy
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Compare against an exhaustive grid search
        #[arg(long)]
        oracle_check: bool,
        /// Grid nodes per axis for --oracle-check
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Diversification pattern of the robust strategy
    Classify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo value estimate and weak optimality principle check
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Probe strategies and probe scenarios to try (0 skips the check)
        #[arg(long, default_value_t = 8)]
        probes: usize,
    },
    /// Brute-force grid minimum of the risk premium
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Analytic gradients of the risk premium against finite differences
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ROBUSTMV_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Input(format!("ROBUSTMV_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot start worker pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (path, outcome) = match cli.command {
        Command::Solve {
            config,
            oracle_check,
            resolution,
        } => {
            let loaded = LoadedConfig::load(&config)?;
            let out = commands::cmd_solve(&loaded, oracle_check, resolution)?;
            (loaded.config.output.path, out)
        }
        Command::Classify { config } => {
            let loaded = LoadedConfig::load(&config)?;
            let out = commands::cmd_classify(&loaded)?;
            (loaded.config.output.path, out)
        }
        Command::Simulate {
            config,
            paths,
            steps,
            seed,
            probes,
        } => {
            let loaded = LoadedConfig::load(&config)?;
            let out = commands::cmd_simulate(&loaded, paths, steps, seed, probes)?;
            (loaded.config.output.path, out)
        }
        Command::Oracle { config, resolution } => {
            let loaded = LoadedConfig::load(&config)?;
            let out = commands::cmd_oracle(&loaded, resolution)?;
            (loaded.config.output.path, out)
        }
        Command::Gradcheck { config, samples, seed } => {
            let loaded = LoadedConfig::load(&config)?;
            let out = commands::cmd_gradcheck(&loaded, samples, seed)?;
            (loaded.config.output.path, out)
        }
    };
    output::emit(&outcome.bytes, path.as_deref())?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("robustmv: {e}");
            ExitCode::from(e.code())
        }
    }
}

//! `thinrein`: solve, sweep, verify and simulate from a JSON run config.
//!
//! Exit codes: 0 success, 2 bad config or arguments, 3 solver failure,
//! 4 verification failure, 5 Monte Carlo rejection, 1 anything else.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thinrein_core::simulator::STRATEGY_NAMES;
use thinrein_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config at {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("cannot access {}: {}", .0.display(), .1)]
    Io(PathBuf, #[source] std::io::Error),
    #[error("solver failed: {0}")]
    Solver(CoreError),
    #[error("QVI check failed: {0}")]
    CheckFailed(String),
    #[error("simulation rejects W: {0}")]
    SimulationRejected(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { field, reason } => CliError::Config { field, reason },
            CoreError::InvalidConfig(msg) => CliError::Usage(msg),
            CoreError::NegativeSurplus(x) => CliError::Usage(format!("surplus must be non-negative, got {x}")),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) | CliError::Io(..) => 2,
            CliError::Solver(_) => 3,
            CliError::CheckFailed(_) => 4,
            CliError::SimulationRejected(_) => 5,
            CliError::Output(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "thinrein", version, about = "Optimal excess-of-loss reinsurance with an impulse dividend band")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write constants.json, curves.csv and value.csv.
    Solve { config: PathBuf },
    /// Solve once per value of a scalar parameter and tabulate the results.
    Sweep {
        config: PathBuf,
        /// `lambda.<group>`, `theta.<class>`, `eta.<class>` or a dotted path.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
    },
    /// Solve and run the QVI checker; exit 4 if any check fails.
    Verify {
        config: PathBuf,
        /// Check `f·W` instead of `W` (negative control).
        #[arg(long)]
        perturb: Option<f64>,
    },
    /// Estimate the value of a strategy by Monte Carlo and compare with W.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        x0: f64,
        #[arg(long, default_value = "optimal", value_parser = clap::builder::PossibleValuesParser::new(STRATEGY_NAMES))]
        strategy: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config } => commands::cmd_solve(&config),
        Command::Sweep { config, param, values } => commands::cmd_sweep(&config, &param, &values),
        Command::Verify { config, perturb } => commands::cmd_verify(&config, perturb),
        Command::Simulate { config, x0, strategy, seed, paths, dt, horizon } => commands::cmd_simulate(
            &config,
            commands::SimulateArgs { x0, strategy: &strategy, seed, paths, dt, horizon },
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

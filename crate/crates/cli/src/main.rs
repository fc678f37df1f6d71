//! `obgame`: solve the learner-user obfuscation game, sweep it, convert
//! privacy parameters and run the validation suites.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage, config or domain
//! error, 3 solver error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use obfuscation_game::Error;

#[derive(Parser)]
#[command(name = "obgame", version, about = "Learner-user data obfuscation game toolkit")]
pub struct Cli {
    /// Game configuration (TOML); the built-in three-user default when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Base seed for randomized suites.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Cross-check the solve against the brute-force oracle.
    #[arg(long, global = true)]
    pub oracle: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Compute the equilibrium and per-user dissuasion thresholds.
    Solve,
    /// Tabulate utilities and best responses over a σ_L range.
    Sweep(SweepArgs),
    /// Convert between noise and (ε, δ), and bound the noise norm.
    Dp(DpArgs),
    /// Run a validation suite: lemma1, lemma2, chi2, scaling or oracle.
    Validate(ValidateArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 0.0)]
    pub sigma_min: f64,
    /// Defaults to the config's solver.sigma_max.
    #[arg(long)]
    pub sigma_max: Option<f64>,
    /// Defaults to the config's solver.grid_step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Comma-separated user perturbation costs; one output set per value,
    /// every user taking that cost.
    #[arg(long, value_delimiter = ',', value_name = "COSTS")]
    pub user_cost: Vec<f64>,
    /// σ_L values at which user utility curves are tabulated; five evenly
    /// spaced points of the range when omitted.
    #[arg(long, value_delimiter = ',', value_name = "SIGMAS")]
    pub levels: Vec<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct DpArgs {
    /// Total noise standard deviation.
    #[arg(long, conflicts_with = "epsilon")]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Defaults to the config's dp.delta.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Data dimension; defaults to the config's dp.d.
    #[arg(long)]
    pub d: Option<usize>,
    /// Chi-square radius factor for the noise-norm bound.
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Learner noise for the norm bound (and for ε when --sigma is absent).
    #[arg(long)]
    pub sigma_l: Option<f64>,
    /// User noise for the norm bound (and for ε when --sigma is absent).
    #[arg(long)]
    pub sigma_s: Option<f64>,
    /// Print CSV instead of aligned text.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args)]
pub struct ValidateArgs {
    pub suite: String,
    /// Trials (chi2: samples per cell; scaling: trials per point).
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    /// Exit 1: a checked invariant failed.
    Validation(String),
    /// Exit 2.
    Usage(String),
    /// Exit 3.
    Solver(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Argument(_) | Error::Config(_) => CliError::Usage(e.to_string()),
            Error::NoFiniteOptimum(_) | Error::Convergence { .. } | Error::Resource(_) => CliError::Solver(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Usage(m) | CliError::Solver(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("obgame: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

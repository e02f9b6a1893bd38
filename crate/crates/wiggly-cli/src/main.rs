//! `wiggly` — command-line front end for proximal (minimizing-movement)
//! dynamics in oscillating energy landscapes: trajectory simulation,
//! homogenized velocity estimation, pinning thresholds, phase-diagram
//! sweeps, the effective limit ODE, discrete-to-limit comparison, profile
//! validation, and the acceptance selftest.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure (including
//! selftest criterion failures), 4 iteration budget exceeded.

mod commands;
mod config;
mod errors;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::ConfigSource;
use crate::errors::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "wiggly",
    version,
    about = "Minimizing movements in oscillating energy landscapes: simulation, homogenized velocities, pinning thresholds, and the effective limit ODE"
)]
struct Cli {
    /// Flat JSON config file; explicit flags override its keys.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for the randomized suites (used by selftest).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full minimizing-movement scheme; writes a t,x trajectory CSV.
    Simulate(commands::SimulateArgs),
    /// Estimate the long-run velocity of the linearized orbit; writes JSON.
    Velocity(commands::VelocityArgs),
    /// Locate the pinning threshold of a profile; writes JSON.
    Threshold(commands::ThresholdArgs),
    /// Sweep velocity estimates over a (gamma, T) grid; writes CSV.
    Phase(commands::PhaseArgs),
    /// Integrate the effective limit ODE; writes a t,x CSV.
    LimitOde(commands::LimitOdeArgs),
    /// Compare discrete runs against the limit ODE across epsilons; writes CSV.
    Compare(commands::CompareArgs),
    /// Check the standing hypotheses on an oscillation profile; writes JSON.
    ValidatePotential(commands::ValidatePotentialArgs),
    /// Run the acceptance suite, one pass/fail line per criterion.
    Selftest(commands::SelftestArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Velocity(_) => "velocity",
            Command::Threshold(_) => "threshold",
            Command::Phase(_) => "phase",
            Command::LimitOde(_) => "limit-ode",
            Command::Compare(_) => "compare",
            Command::ValidatePotential(_) => "validate-potential",
            Command::Selftest(_) => "selftest",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = ConfigSource::load(cli.config.as_deref())?;
    if let Some(threads) = cfg.usize("threads", cli.threads)? {
        if threads == 0 {
            return Err(CliError::Config("threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure {threads} worker threads: {e}")))?;
    }
    let seed = cfg.u64("seed", cli.seed)?.unwrap_or(0);
    cfg.expect_command(cli.command.name())?;
    match &cli.command {
        Command::Simulate(args) => commands::simulate(args, cfg),
        Command::Velocity(args) => commands::velocity(args, cfg),
        Command::Threshold(args) => commands::threshold(args, cfg),
        Command::Phase(args) => commands::phase(args, cfg),
        Command::LimitOde(args) => commands::limit_ode(args, cfg),
        Command::Compare(args) => commands::compare(args, cfg),
        Command::ValidatePotential(args) => commands::validate_potential_cmd(args, cfg),
        Command::Selftest(args) => commands::selftest(args, cfg, seed),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

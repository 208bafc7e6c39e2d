//! Command-line driver: parses the run configuration, dispatches to the
//! subcommands and maps failures to exit codes.
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success                                   |
//! | 1    | file i/o failure                          |
//! | 2    | configuration error                       |
//! | 3    | threshold search (or sweep row) failure   |
//! | 4    | hypothesis check failed                   |
//! | 5    | certificate or verification failed        |

pub mod commands;
pub mod config;
pub mod error;
pub mod statefile;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Reporter;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "neumann-lab",
    version,
    about = "Thresholds, solutions and sweeps for subquadratic Neumann systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, default_value = "neumann.toml")]
    pub config: PathBuf,
    /// Seed for random starts; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress human-readable output and warnings.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute s_F and S_F and the interval endpoints 1/S_F, 1/s_F.
    Thresholds,
    /// Sample the sign and growth hypotheses on F.
    CheckHypotheses,
    /// Find distinct solutions at a single λ and write state files.
    Solve,
    /// Count solutions over a list of λ values and write sweep.csv.
    Sweep,
    /// Track solutions under the perturbation μ d G.
    Perturb,
    /// Re-evaluate the residual of saved state files.
    Verify {
        /// State files; defaults to every file listed in <out>/solutions.csv.
        files: Vec<PathBuf>,
    },
}

/// Runs one invocation and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let reporter = Reporter { quiet: cli.quiet };
    match execute(&cli, &reporter) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, reporter: &Reporter) -> Result<(), CliError> {
    let cfg = RunConfig::load(&cli.config, cli.seed, cli.out.clone())?;
    match &cli.command {
        Command::Thresholds => commands::cmd_thresholds(&cfg, reporter).map(drop),
        Command::CheckHypotheses => commands::cmd_check_hypotheses(&cfg, reporter).map(drop),
        Command::Solve => commands::cmd_solve(&cfg, reporter).map(drop),
        Command::Sweep => commands::cmd_sweep(&cfg, reporter).map(drop),
        Command::Perturb => commands::cmd_perturb(&cfg, reporter).map(drop),
        Command::Verify { files } => commands::cmd_verify(&cfg, files, reporter).map(drop),
    }
}

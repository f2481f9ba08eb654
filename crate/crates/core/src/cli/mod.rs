//! The `noma-sim` command line.
//!
//! Three subcommands share one configuration file and a common set of
//! overrides:
//!
//! * `solve`: one channel realization through the centralized and
//!   distributed solvers, printed per user.
//! * `montecarlo`: outage and sum-power tables plus a metadata sidecar.
//! * `converge`: per-update trace of the distributed solver.
//!
//! Exit codes: 0 on success, 2 when `solve` finds the instance
//! infeasible, 1 on usage, configuration or I/O errors.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::channel::FadingMode;
use crate::experiments::SchemeKind;
use crate::interference::OmaMode;

pub use commands::{cmd_converge, cmd_montecarlo, cmd_solve, Overrides, SolveReport};
pub use config::{CellSizes, ConfigError, ExperimentSection, RunConfig, SolverSection, SystemSection};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "noma-sim", version, about = "Minimum-power allocation for multi-cell uplink NOMA with imperfect SIC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one channel realization with both solvers
    Solve(SolveArgs),
    /// Run the outage and sum-power sweeps
    Montecarlo(CommonArgs),
    /// Trace the distributed solver on one feasible drop
    Converge(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file; missing keys take defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides experiment.seed)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo trials
    #[arg(long)]
    pub trials: Option<usize>,
    /// Directory for output files
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Restrict to one multiple-access scheme
    #[arg(long)]
    pub scheme: Option<SchemeKind>,
    /// SIC coefficient(s), comma separated
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,
    /// Minimum SINR target(s) in dB, comma separated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub gamma_db: Vec<f64>,
    /// OMA target mapping: rate-equivalent or same-sinr
    #[arg(long)]
    pub oma_mode: Option<OmaMode>,
    /// Small-scale fading: rayleigh or pathloss-only
    #[arg(long)]
    pub fading: Option<FadingMode>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Write the centralized powers as CSV
    #[arg(long)]
    pub dump_powers: Option<PathBuf>,
    /// Write the channel gains as CSV
    #[arg(long)]
    pub dump_channel: Option<PathBuf>,
    /// Write the nonzero entries of the interference matrix as CSV
    #[arg(long)]
    pub dump_matrix: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args).map(|report| {
            print!("{}", report.render());
            if report.feasible() {
                EXIT_OK
            } else {
                EXIT_INFEASIBLE
            }
        }),
        Command::Montecarlo(args) => cmd_montecarlo(args).map(|summary| {
            print!("{summary}");
            EXIT_OK
        }),
        Command::Converge(args) => cmd_converge(args).map(|summary| {
            print!("{summary}");
            EXIT_OK
        }),
    };
    result.unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        EXIT_ERROR
    })
}

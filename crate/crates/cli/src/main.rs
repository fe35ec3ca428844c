//! `mfs`: solve, sweep, grow clusters and evaluate fields from TOML configs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime or convergence failure.

mod build;
mod cluster_file;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Common;
use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] mfs_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use mfs_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::InvalidArgument(_) | E::DimensionMismatch { .. } | E::Parse { .. }) => 2,
            _ => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "mfs", version, about = "Exterior Laplace and Stokes solvers for particle clusters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Evaluator worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve one boundary-value problem.
    Solve,
    /// Run a convergence sweep.
    Convergence,
    /// Grow a cluster and write it to a cluster file.
    Cluster,
    /// Evaluate a solved field at target points.
    EvalField,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let config = RunConfig::load(&path)?;
    if cli.threads == Some(0) {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Runtime(format!("{}: {e}", cli.out.display())))?;
    let seed = cli.seed.or(config.seed).unwrap_or(1);
    let common = Common { config, out: &cli.out, threads: cli.threads, seed };
    match cli.command {
        Command::Solve => commands::solve(common),
        Command::Convergence => commands::convergence(common),
        Command::Cluster => commands::cluster(common),
        Command::EvalField => commands::eval_field(common),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mfs: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

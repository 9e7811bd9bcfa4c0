//! Batch front end for the `flexbeam` toolkit: configuration ingestion, the
//! `certify`, `simulate`, `verify` and `converge` workflows, and report files.
//!
//! Exit codes: 0 when the workflow's verdict passes, 1 when it is negative
//! (infeasible gains, a violated property), 2 for configuration or usage
//! errors.

use std::io;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod config;
pub mod output;
pub mod workflows;

pub use config::RunConfig;
pub use workflows::{Outcome, Setup};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] flexbeam::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "flexbeam",
    version,
    about = "Certify, simulate and verify boundary feedback for a flexible beam"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Gain feasibility and norm-equivalence constants (certificate.json).
    Certify(Common),
    /// Closed-loop run (trajectory.csv, summary.json).
    Simulate(Common),
    /// Property battery with a seeded generator (verification.json).
    Verify(Common),
    /// Mesh refinement table (convergence.csv).
    Converge(Common),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Self::Certify(c) | Self::Simulate(c) | Self::Verify(c) | Self::Converge(c) => c,
        }
    }
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Eq, clap::Args)]
pub struct Common {
    /// TOML or JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for property sweeps (overrides `sim.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Loads the configuration, applies command-line overrides and runs one
/// workflow.
pub fn run(command: &Command) -> Result<Outcome, CliError> {
    let common = command.common();
    let mut config = RunConfig::from_file(&common.config)?;
    if let Some(seed) = common.seed {
        config.sim.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    let base = common.config.parent().unwrap_or(Path::new("."));
    let setup = Setup::new(&config, base)?;
    let out = config.output.dir.as_path();
    match command {
        Command::Certify(_) => workflows::certify(&setup, out),
        Command::Simulate(_) => workflows::simulate(&setup, out),
        Command::Verify(_) => workflows::verify(&setup, out),
        Command::Converge(_) => workflows::converge(&setup, out),
    }
}

/// Process exit code for a workflow result.
pub fn exit_code(result: &Result<Outcome, CliError>) -> i32 {
    match result {
        Ok(outcome) if outcome.pass => 0,
        Ok(_) => 1,
        Err(e) => e.exit_code(),
    }
}

//! Command-line experiment harness for `smc_forget`.
//!
//! Every subcommand reads a TOML config, runs on a rayon pool and writes
//! CSV (or, for `verify-bounds`, a text report) under the output directory.
//! Exit status is 0 on success, 2 when a check fails and 1 on usage,
//! configuration or runtime errors.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Check, Status, Verdict};
pub use config::ExperimentConfig;
pub use error::CliError;
pub use output::ResultRecord;
pub use runner::Context;

#[derive(Debug, Parser)]
#[command(name = "smc-forget", version, about = "Particle filter forgetting and coupling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides `run.master_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; falls back to SMC_FORGET_THREADS, then `run.threads`.
    #[arg(long, global = true, env = "SMC_FORGET_THREADS")]
    pub threads: Option<usize>,

    /// Overrides `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Exact forgetting total variation over (N, k).
    Forgetting,
    /// Exact propagation-of-chaos total variation over (N, q, k).
    Poc,
    /// Monte Carlo L2 errors of the PF and CPF.
    LpError,
    /// Coupling times of coupled particle filters.
    CouplingTime,
    /// Exact checks of the stated bounds.
    VerifyBounds,
    /// Delayed-measurement processing and coupling diagnostics.
    OosDemo,
}

impl Cli {
    pub fn context(&self) -> Result<Context, CliError> {
        let path = self.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
        if self.threads == Some(0) {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        let cfg = ExperimentConfig::load(path)?;
        Context::new(cfg, self.seed, self.threads, self.out.clone())
    }
}

pub fn run_command(command: Command, ctx: &Context) -> Result<Status, CliError> {
    match command {
        Command::Forgetting => commands::forgetting::run(ctx),
        Command::Poc => commands::poc::run(ctx),
        Command::LpError => commands::lp_error::run(ctx),
        Command::CouplingTime => commands::coupling_time::run(ctx),
        Command::VerifyBounds => commands::verify_bounds::run(ctx),
        Command::OosDemo => commands::oos_demo::run(ctx),
    }
}

/// Parses `args` and runs the command, returning the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.context().and_then(|ctx| run_command(cli.command, &ctx)) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

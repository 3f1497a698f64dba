//! Command-line driver for `qubo-ct`: argument parsing, the pipeline
//! configuration and every on-disk format.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use qubo_ct::Execution;

pub use commands::Context;
pub use config::PipelineConfig;
pub use error::{CliError, Result};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "QUBO_CT_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "qubo-ct",
    version,
    about = "CT segmentation from sinograms via QUBO models"
)]
pub struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a binary phantom image.
    Phantom(commands::PhantomArgs),
    /// Forward project an image into a sinogram.
    Project(commands::ProjectArgs),
    /// Build a QUBO model from a sinogram.
    Build(commands::BuildArgs),
    /// Minimize a QUBO model.
    Solve(commands::SolveArgs),
    /// FBP reconstruction and threshold segmentation.
    Baseline(commands::BaselineArgs),
    /// Compare two masks.
    Compare(commands::CompareArgs),
    /// Run the full pipeline from a TOML configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Executes a parsed command line and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let ctx = Context::new(cli.out_dir.clone(), exec);
    match &cli.command {
        Command::Phantom(a) => commands::cmd_phantom(&ctx, a),
        Command::Project(a) => commands::cmd_project(&ctx, a),
        Command::Build(a) => commands::cmd_build(&ctx, a),
        Command::Solve(a) => commands::cmd_solve(&ctx, a),
        Command::Baseline(a) => commands::cmd_baseline(&ctx, a),
        Command::Compare(a) => commands::cmd_compare(&ctx, a),
        Command::Run { config } => {
            let cfg = PipelineConfig::load(config)?;
            Ok(run::cmd_run(&ctx, &cfg)?.written)
        }
    }
}

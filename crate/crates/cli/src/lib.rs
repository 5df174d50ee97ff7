//! Command-line plumbing: TOML configs, CSV/JSON output, run manifests and
//! checkpoint handling around `nls-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod emit;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nls_core::experiments::Scenario;

pub use commands::{Outcome, RunManifest, TrajectoryReport};
pub use config::{parse_config, parse_config_str, LoadedConfig};
pub use emit::Format;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "nls", version, about = "Radial defocusing NLS experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trajectory and emit conservation and norm logs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, default_value_t = 10)]
        log_stride: usize,
    },
    /// Evaluate every diagnostic of the configured initial data.
    Norms {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario whose defaults are used when no config is given.
        #[arg(long, default_value = "free_flow")]
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named scenario at two resolutions.
    Experiment {
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    #[command(subcommand)]
    Checkpoint(CheckpointCommand),
}

#[derive(Debug, Subcommand)]
pub enum CheckpointCommand {
    /// Integrate to `--at` and write a checkpoint.
    Save {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        at: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        log_stride: usize,
    },
    /// Continue a checkpoint to `--t-end`.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        t_end: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Also write the final state as a checkpoint.
        #[arg(long)]
        save: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Simulate { config, out, format, log_stride } => commands::simulate(&config, &out, format, log_stride),
        Command::Norms { config, scenario, out } => {
            let scenario: Scenario = scenario.parse()?;
            let (text, outcome) = commands::norms(config.as_deref(), scenario, out.as_deref())?;
            print!("{text}");
            Ok(outcome)
        }
        Command::Experiment { name, config, out, format } => {
            commands::experiment(&name, config.as_deref(), &out, format)
        }
        Command::Checkpoint(CheckpointCommand::Save { config, at, out, log_stride }) => {
            let ckpt = commands::checkpoint_save(&config, at, &out, log_stride)?;
            println!("saved step {} (t = {}) to {}", ckpt.step, ckpt.time(), out.display());
            Ok(Outcome { passed: true, dir: None, artifacts: vec![out.display().to_string()] })
        }
        Command::Checkpoint(CheckpointCommand::Resume { checkpoint, t_end, out, format, save }) => {
            commands::checkpoint_resume(&checkpoint, t_end, &out, format, save.as_deref())
        }
    }
}

//! Command-line front end for `kaya-lmdi`.
//!
//! Exit codes: 0 success, 1 input or validation failure, 2 closure or other
//! numeric failure, 3 I/O failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{RunArgs, RunConfig};
pub use crate::error::{CliError, Exit};

#[derive(Debug, Parser)]
#[command(
    name = "kaya-lmdi",
    version,
    about = "Household CO2 intensity decomposition and mitigation assessment"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a panel's schema, positivity and group sums.
    Validate(RunArgs),
    /// Decompose intensity changes into factor effects.
    Decompose(RunArgs),
    /// Decompose, then assess mitigation, periods, savings and trends.
    Assess(RunArgs),
    /// Write the builtin identity configuration for editing.
    EmitIdentity {
        /// Destination TOML file.
        path: PathBuf,
    },
}

pub fn execute(command: &Command) -> Result<Exit, CliError> {
    match command {
        Command::Validate(args) => commands::cmd_validate(&RunConfig::resolve(args)?),
        Command::Decompose(args) => commands::cmd_decompose(&RunConfig::resolve(args)?),
        Command::Assess(args) => commands::cmd_assess(&RunConfig::resolve(args)?),
        Command::EmitIdentity { path } => commands::cmd_emit_identity(path),
    }
}

/// Parses arguments, runs the command and reports errors on stderr.
pub fn run<I, T>(args: I) -> Exit
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Exit::Input } else { Exit::Ok };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit()
        }
    }
}

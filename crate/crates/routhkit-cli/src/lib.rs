//! Command-line front end for routhkit: run the full and reduced pipelines,
//! compare them and export trajectories.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

pub use commands::{execute, Command};
pub use config::{RunArgs, RunConfig, Tolerances};
pub use error::{CliError, CliResult};
pub use table::{Format, Table};

#[derive(Debug, Parser)]
#[command(name = "routhkit", version, about = "Routh reduction for Lagrangian systems with symmetry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Integrate the full Euler-Lagrange equations.
    Simulate(RunArgs),
    /// Integrate the reduced equations on a momentum level.
    Reduce(RunArgs),
    /// Rebuild full trajectories from a reduced file.
    Reconstruct(RunArgs),
    /// Run both pipelines from one state and compare them.
    Compare(RunArgs),
}

impl Sub {
    fn split(&self) -> (Command, &RunArgs) {
        match self {
            Sub::Simulate(a) => (Command::Simulate, a),
            Sub::Reduce(a) => (Command::Reduce, a),
            Sub::Reconstruct(a) => (Command::Reconstruct, a),
            Sub::Compare(a) => (Command::Compare, a),
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
/// Errors are printed to stderr as JSON.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(std::io::stdout(), "{e}");
                return 0;
            }
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    let (command, args) = cli.command.split();
    let result = RunConfig::resolve(args).and_then(|cfg| execute(command, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

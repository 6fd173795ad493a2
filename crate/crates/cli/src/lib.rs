//! Orchestration for the `levy-spde` binary: argument and config parsing,
//! registries, delimited records and run manifests.

pub mod commands;
pub mod records;
pub mod registry;
pub mod run;

use std::ffi::OsString;

use clap::Parser;
use thiserror::Error;

pub use run::{Context, Outcome};

/// Exit status when every check passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status for a runtime error that is not a suite verdict.
pub const EXIT_ERROR: i32 = 1;
/// Exit status when a suite ran and at least one check failed.
pub const EXIT_SUITE_FAILURE: i32 = 2;
/// Exit status for unknown subcommands, flags or registry names.
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Stable(#[from] levy_spde::stable::StableError),
    #[error(transparent)]
    Spectral(#[from] levy_spde::spectral::SpectralError),
    #[error(transparent)]
    Function(#[from] levy_spde::functions::FunctionError),
    #[error(transparent)]
    Mehler(#[from] levy_spde::mehler::MehlerError),
    #[error(transparent)]
    Grid(#[from] levy_spde::grid::GridError),
    #[error(transparent)]
    Kolmogorov(#[from] levy_spde::kolmogorov::KolmogorovError),
    #[error(transparent)]
    Simulation(#[from] levy_spde::simulator::SimError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Function(levy_spde::functions::FunctionError::Unknown { .. }) => EXIT_USAGE,
            _ => EXIT_ERROR,
        }
    }
}

/// Parse `argv` and run; returns the process exit status.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match commands::Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_USAGE,
            };
        }
    };
    match commands::dispatch(cli) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.pass {
                EXIT_PASS
            } else {
                EXIT_SUITE_FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Failures mapped onto the documented exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(graphgi_core::Error),
}

impl From<graphgi_core::Error> for CliError {
    fn from(e: graphgi_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn code(&self) -> u8 {
        use graphgi_core::Error;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(Error::Input(_) | Error::Parse { .. } | Error::Io(_)) => 3,
            CliError::Core(Error::Capacity(_)) => 4,
            CliError::Core(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("graphgi: {e}");
            ExitCode::from(e.code())
        }
    }
}

mod args;
mod commands;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use hgib_core::Error;

use args::{Cli, Command};

/// Exit code 2 for bad input (usage, unreadable or invalid files), 1 for
/// failures during a run.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Runtime(String),
    Mismatch(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Runtime(_) | CliError::Mismatch(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
            CliError::Mismatch(m) => write!(f, "mismatch: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = match &e {
            Error::Parse(m) => format!("parse error: {m}"),
            Error::Validation(m) => format!("validation error: {m}"),
            other => other.to_string(),
        };
        match e {
            Error::Parse(_)
            | Error::Validation(_)
            | Error::InvalidConfig(_)
            | Error::InvalidPerturbation(_)
            | Error::InvalidAlpha(_)
            | Error::InvalidEpsilon(_)
            | Error::InvalidRate(_)
            | Error::UnknownMask(_)
            | Error::DatasetMask(_) => CliError::Input(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => commands::cmd_train(a),
        Command::Evaluate(a) => commands::cmd_evaluate(a),
        Command::Sweep(a) => commands::cmd_sweep(a),
        Command::Ablate(a) => commands::cmd_ablate(a),
        Command::Synth(a) => commands::cmd_synth(a),
        Command::Replay(a) => commands::cmd_replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hgib: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

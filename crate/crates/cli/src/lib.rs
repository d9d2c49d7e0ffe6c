//! Command implementations behind the `cascadeflow` binary.

pub mod args;
pub mod commands;
mod error;
pub mod report;

use std::process::ExitCode;

use args::{Cli, Command};
pub use error::CliError;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Sweep(a) => commands::sweep(a).map(drop),
        Command::Compare(a) => commands::compare(a).map(drop),
        Command::Mcnemar(a) => commands::mcnemar_cmd(a).map(drop),
        Command::Serve(a) => commands::serve_cmd(a),
        Command::PseudoLabel(a) => commands::pseudo_label(a).map(drop),
    }
}

pub fn main_with(cli: &Cli) -> ExitCode {
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("cascadeflow: {err}");
            err.exit_code()
        }
    }
}

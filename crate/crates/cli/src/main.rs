//! `ipgap` command-line interface.
//!
//! Exit codes: 0 success, 1 a bound was violated, 2 invalid input (with a
//! JSON error object on stderr).

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command, OutputFormat};
use commands::Outcome;

const EXIT_VIOLATION: u8 = 1;
const EXIT_INPUT: u8 = 2;

fn input_error(kind: &str, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message.to_string() }));
    ExitCode::from(EXIT_INPUT)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => return input_error("Usage", e.to_string().trim_end()),
    };
    let default_format = match cli.command {
        Command::Verify(_) | Command::Sweep(_) => OutputFormat::Csv,
        _ => OutputFormat::Json,
    };
    let format = cli.output_format.unwrap_or(default_format);
    let result = match &cli.command {
        Command::Gaps(a) => commands::gaps(a, format),
        Command::Bound(a) => commands::bound(a, format),
        Command::Mgf(a) => commands::mgf(a, format),
        Command::Verify(a) => commands::verify(a, format),
        Command::Sweep(a) => commands::sweep(a, format),
        Command::Radius(a) => commands::radius(a, format),
        Command::Examples(a) => commands::examples(a, format),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(EXIT_VIOLATION),
        Err(e) => match e.downcast_ref::<ipgap_core::Error>() {
            Some(core) => input_error(core.kind(), core),
            None => input_error("Io", format!("{e:#}")),
        },
    }
}

//! Command-line front end for `trigprod`.
//!
//! Exit codes: 0 success (including findings), 1 verification failure,
//! 2 invalid arguments, 3 pole-guard rejection, 4 tolerance, range or
//! precision-floor violation, 5 too few samples for a rate fit.

pub mod args;
pub mod bench;
pub mod commands;
pub mod input;
pub mod output;

use std::io::Write;

use clap::Parser;
use trigprod::{Error, Precision};

use crate::args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_POLE: i32 = 3;
pub const EXIT_LIMIT: i32 = 4;
pub const EXIT_SAMPLES: i32 = 5;

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::PoleProximity(_) => EXIT_POLE,
            Error::ToleranceUnreachable { .. }
            | Error::BelowPrecisionFloor { .. }
            | Error::RangeCap(_)
            | Error::NonFinite(_) => EXIT_LIMIT,
            Error::InsufficientSamples { .. } => EXIT_SAMPLES,
            Error::IndexOutOfRange { .. }
            | Error::InvalidRequest(_)
            | Error::InvalidPrecision(_)
            | Error::UnsupportedFormula(_) => EXIT_USAGE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: format!("output error: {e}"),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: format!("csv output error: {e}"),
        }
    }
}

/// Parses `args` and runs the command, writing the payload to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let prec = Precision::new(cli.precision)?;
    let fmt = cli.format;
    match &cli.command {
        Command::Eval(a) => commands::eval(a, prec, fmt, out),
        Command::Verify(a) => commands::verify(a, prec, fmt, out),
        Command::Converge(a) => commands::converge(a, prec, fmt, out),
        Command::Table(a) => commands::table(a, prec, fmt, out),
        Command::Bench(a) => bench::command(a, prec, fmt, out),
    }
}

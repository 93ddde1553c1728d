//! Output envelope and the JSON, CSV and text writers.
//!
//! High-precision values are written as decimal strings in every format,
//! using the same digits, so the formats agree exactly.

use std::io::Write;

use rug::Complex;
use serde::Serialize;
use trigprod::serde_complex::decimal;
use trigprod::Flags;

use crate::CliError;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Serialize)]
pub struct Envelope<'a, Q: Serialize, R: Serialize> {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub precision_bits: u32,
    pub request_echo: &'a Q,
    pub result: &'a R,
    pub warnings: Vec<String>,
}

pub fn write_json<Q: Serialize, R: Serialize>(
    out: &mut dyn Write,
    command: &'static str,
    precision_bits: u32,
    request: &Q,
    result: &R,
    warnings: Vec<String>,
) -> Result<(), CliError> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        precision_bits,
        request_echo: request,
        result,
        warnings,
    };
    serde_json::to_writer_pretty(&mut *out, &env)
        .map_err(|e| CliError::usage(format!("json output error: {e}")))?;
    writeln!(out)?;
    Ok(())
}

/// RFC 4180 writer with a header row.
pub fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out)
}

pub fn re(z: &Complex) -> String {
    decimal(z.real())
}

pub fn im(z: &Complex) -> String {
    decimal(z.imag())
}

/// `re + im i` with both parts at full precision.
pub fn complex_text(z: &Complex) -> String {
    let im = z.imag();
    if im.is_sign_negative() {
        format!(
            "{} - {}i",
            decimal(z.real()),
            decimal(&rug::Float::with_val(im.prec(), -im))
        )
    } else {
        format!("{} + {}i", decimal(z.real()), decimal(im))
    }
}

pub fn flags_text(flags: &Flags) -> String {
    let names: Vec<String> = flags
        .iter()
        .map(|f| {
            serde_json::to_value(f)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default()
        })
        .collect();
    names.join("|")
}

pub fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

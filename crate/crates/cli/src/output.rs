//! Locale-independent CSV and JSON emission.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Shortest round-trip decimal; `inf`/`-inf` for infinities and scientific
/// notation for very small or very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// `|estimate - analytic|`, zero when both are the same infinity.
pub fn abs_error(estimate: f64, analytic: f64) -> f64 {
    if estimate == analytic {
        0.0
    } else {
        (estimate - analytic).abs()
    }
}

/// Opens `path`, or stdout when absent.
pub fn open_sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::io(p.display().to_string(), e))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        None => Ok(Box::new(io::BufWriter::new(io::stdout()))),
    }
}

pub fn csv_writer(path: Option<&Path>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(open_sink(path)?))
}

pub fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let mut sink = open_sink(path)?;
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::config(format!("cannot serialize summary: {e}")))?;
    let target = path.map(|p| p.display().to_string()).unwrap_or("<stdout>".into());
    writeln!(sink, "{text}")
        .and_then(|_| sink.flush())
        .map_err(|e| CliError::io(target, e))
}

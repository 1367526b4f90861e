//! Writing reports to a file or stdout.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::{CliResult, Failure};

pub fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    emit(out, &(text + "\n"))
}

/// Serialises `rows` as CSV with a header taken from the row type.
pub fn write_csv<T: Serialize>(out: Option<&Path>, rows: &[T]) -> CliResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
    emit(out, &String::from_utf8_lossy(&bytes))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

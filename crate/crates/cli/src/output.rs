//! CSV rows, JSON verdicts and atomic file emission.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use heatcontent::ValueWithError;

use crate::CliError;

pub const CSV_HEADER: [&str; 7] = ["t", "quantity", "value", "err", "lower", "upper", "pass"];
pub const VERDICT_SCHEMA: u32 = 1;

/// One output row. `err` is the rigorous error bound, or the standard error
/// for Monte Carlo estimates; `pass` is empty when the row is not a check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub t: f64,
    pub quantity: String,
    pub value: f64,
    pub err: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: Option<bool>,
}

impl Row {
    pub fn enclosure(t: f64, quantity: &str, v: ValueWithError) -> Self {
        Self {
            t,
            quantity: quantity.to_string(),
            value: v.value,
            err: v.error_bound,
            lower: v.lower(),
            upper: v.upper(),
            pass: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub schema: u32,
    pub command: String,
    pub pass: bool,
    pub fitted: Value,
    pub expected: Value,
    pub tolerance: Value,
}

impl Verdict {
    pub fn new(command: &str, pass: bool, fitted: Value, expected: Value, tolerance: Value) -> Self {
        Self {
            schema: VERDICT_SCHEMA,
            command: command.to_string(),
            pass,
            fitted,
            expected,
            tolerance,
        }
    }
}

pub fn csv_bytes(rows: &[Row]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_empty_pass_column() {
        let rows = vec![Row::enclosure(0.5, "H", ValueWithError::new(1.0, 0.25))];
        let text = String::from_utf8(csv_bytes(&rows).unwrap()).unwrap();
        assert_eq!(text, "t,quantity,value,err,lower,upper,pass\n0.5,H,1.0,0.25,0.75,1.25,\n");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("out.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}

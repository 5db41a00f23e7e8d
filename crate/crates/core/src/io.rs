//! CSV input: one row per observation, `m` numeric columns, optional header.
//!
//! The first record is taken as a header when any of its fields is not a
//! number. Missing values, `NaN` and infinities are rejected.

use std::io::Read;
use std::path::Path;

use crate::{Error, Result, Sample};

/// Reads a sample from CSV text.
pub fn read_sample<R: Read>(input: R) -> Result<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut dim = None;
    let mut values = Vec::new();
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if line == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            dim = Some(record.len());
            continue;
        }
        let m = *dim.get_or_insert(record.len());
        if record.len() != m {
            return Err(Error::Input(format!(
                "row {} has {} columns, expected {m}",
                line + 1,
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Input(format!("row {}, column {}: `{field}` is not a number", line + 1, col + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::Input(format!(
                    "row {}, column {}: non-finite value `{field}`",
                    line + 1,
                    col + 1
                )));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Input("no observations".into()));
    }
    Sample::new(dim.unwrap_or(1), values)
}

pub fn read_sample_file(path: &Path) -> Result<Sample> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    read_sample(file)
}

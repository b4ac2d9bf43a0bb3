//! CSV ingestion and emission of event sequences.
//!
//! Format: a header row with one column named `t` (float, task units), an
//! optional `y` target column, and any number of numeric feature columns.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::EventSequence;

#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct CsvSchema {
    /// When set, empty cells parse as 0.0; otherwise rows with gaps are
    /// rejected with the row number.
    #[serde(default)]
    pub missing_as_zero: bool,
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<EventSequence> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut t_col = None;
    let mut y_col = None;
    let mut feature_cols = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        match name {
            "t" => t_col = Some(i),
            "y" => y_col = Some(i),
            _ => feature_cols.push(i),
        }
    }
    let t_col = t_col.ok_or_else(|| Error::InvalidData("CSV has no `t` column".into()))?;
    if feature_cols.is_empty() {
        return Err(Error::InvalidData("CSV has no feature columns".into()));
    }

    let mut timestamps = Vec::new();
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            let cell = record.get(i).unwrap_or("");
            if cell.is_empty() {
                if schema.missing_as_zero {
                    Ok(0.0)
                } else {
                    Err(Error::InvalidData(format!(
                        "missing value in row {} column `{}`",
                        row_idx + 2,
                        headers.get(i).unwrap_or("?")
                    )))
                }
            } else {
                cell.parse::<f64>().map_err(|_| {
                    Error::InvalidData(format!(
                        "non-numeric value `{cell}` in row {} column `{}`",
                        row_idx + 2,
                        headers.get(i).unwrap_or("?")
                    ))
                })
            }
        };
        timestamps.push(parse(t_col)?);
        for &c in &feature_cols {
            features.push(parse(c)?);
        }
        if let Some(y) = y_col {
            targets.push(parse(y)?);
        }
    }
    EventSequence::new(
        timestamps,
        features,
        feature_cols.len(),
        y_col.map(|_| targets),
    )
}

/// Write a sequence in the same format `load_csv` reads. Feature columns are
/// named `x0..x{d-1}`.
pub fn save_csv(path: &Path, seq: &EventSequence) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header = String::from("t");
    for d in 0..seq.dim {
        header.push_str(&format!(",x{d}"));
    }
    if seq.targets.is_some() {
        header.push_str(",y");
    }
    writeln!(out, "{header}")?;
    for i in 0..seq.len() {
        write!(out, "{}", seq.timestamps[i])?;
        for v in seq.feature_row(i) {
            write!(out, ",{v}")?;
        }
        if let Some(t) = &seq.targets {
            write!(out, ",{}", t[i])?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

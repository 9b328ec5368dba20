//! Feature export for downstream classifiers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::embed::EmbeddingRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Jsonl,
    Csv,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(ExportFormat::Jsonl),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(Error::config(format!("unknown export format {other:?} (expected jsonl or csv)"))),
        }
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    id: &'a str,
    vector: &'a [f64],
}

/// Width shared by all records; errors on the first mismatch.
pub fn uniform_width(records: &[EmbeddingRecord]) -> Result<usize> {
    let width = records.first().map_or(0, |r| r.vector.len());
    if let Some(r) = records.iter().find(|r| r.vector.len() != width) {
        return Err(Error::shape(format!(
            "record {} has width {}, expected {width}",
            r.id,
            r.vector.len()
        )));
    }
    Ok(width)
}

pub fn write_features<W: Write>(records: &[EmbeddingRecord], format: ExportFormat, out: W) -> Result<()> {
    let width = uniform_width(records)?;
    match format {
        ExportFormat::Jsonl => {
            let mut out = out;
            for r in records {
                serde_json::to_writer(&mut out, &JsonRow { id: &r.id, vector: &r.vector })?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let header: Vec<String> = std::iter::once("id".to_string())
                .chain((0..width).map(|i| format!("v{i}")))
                .collect();
            w.write_record(&header)?;
            for r in records {
                let row: Vec<String> = std::iter::once(r.id.clone())
                    .chain(r.vector.iter().map(|v| v.to_string()))
                    .collect();
                w.write_record(&row)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn export_features(records: &[EmbeddingRecord], path: impl AsRef<Path>, format: ExportFormat) -> Result<()> {
    uniform_width(records)?;
    write_features(records, format, BufWriter::new(File::create(path)?))
}

/// Read a JSONL feature file back.
pub fn read_features_jsonl(path: impl AsRef<Path>) -> Result<Vec<EmbeddingRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::space::CellArch;

/// One externally measured architecture: accuracy is a percentage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRecord {
    pub arch: CellArch,
    pub accuracy: f64,
}

#[derive(Deserialize)]
struct Line {
    arch: String,
    accuracy: f64,
}

/// Reads JSON-lines records `{"arch": "...", "accuracy": 93.1}`. Blank lines
/// are skipped and extra fields ignored.
pub fn read_bench(reader: impl Read) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| Error::BenchParse {
            line: line_no,
            detail: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let raw: Line = serde_json::from_str(&text).map_err(|e| Error::BenchParse {
            line: line_no,
            detail: e.to_string(),
        })?;
        let arch: CellArch = raw.arch.parse().map_err(|e: Error| Error::BenchParse {
            line: line_no,
            detail: e.to_string(),
        })?;
        if !(0.0..=100.0).contains(&raw.accuracy) {
            return Err(Error::AccuracyRange {
                line: line_no,
                value: raw.accuracy,
            });
        }
        if !seen.insert(arch) {
            return Err(Error::BenchDuplicate {
                line: line_no,
                arch: arch.to_string(),
            });
        }
        out.push(BenchRecord {
            arch,
            accuracy: raw.accuracy,
        });
    }
    Ok(out)
}

pub fn load_bench(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    let path = path.as_ref();
    read_bench(std::fs::File::open(path).map_err(|e| Error::io(path, e))?)
}

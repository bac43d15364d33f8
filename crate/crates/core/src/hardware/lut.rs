use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const HEADER: [&str; 7] = ["op", "c_in", "c_out", "h", "w", "stride", "latency_us"];
pub const OVERHEAD_OP: &str = "__overhead__";

/// Lookup key: operator name plus the input shape it was profiled at.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LatencyKey {
    pub op: String,
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub stride: usize,
}

impl fmt::Display for LatencyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, c_in={}, c_out={}, h={}, w={}, stride={})",
            self.op, self.c_in, self.c_out, self.h, self.w, self.stride
        )
    }
}

/// Profiled per-operator latencies (µs) plus a constant device overhead.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatencyTable {
    entries: BTreeMap<LatencyKey, f64>,
    overhead_us: f64,
    device_label: String,
}

impl LatencyTable {
    pub fn new(device_label: impl Into<String>, overhead_us: f64) -> Result<Self> {
        if !(overhead_us >= 0.0 && overhead_us.is_finite()) {
            return Err(Error::LutNegative {
                line: 0,
                value: overhead_us,
            });
        }
        Ok(LatencyTable {
            entries: BTreeMap::new(),
            overhead_us,
            device_label: device_label.into(),
        })
    }

    /// Adds an entry; keys must be new and latencies finite and non-negative.
    pub fn insert(&mut self, key: LatencyKey, latency_us: f64) -> Result<()> {
        self.insert_at(0, key, latency_us)
    }

    fn insert_at(&mut self, line: usize, key: LatencyKey, latency_us: f64) -> Result<()> {
        if !latency_us.is_finite() {
            return Err(Error::LutMalformed {
                line,
                detail: format!("latency {latency_us} is not finite"),
            });
        }
        if latency_us < 0.0 {
            return Err(Error::LutNegative {
                line,
                value: latency_us,
            });
        }
        if self.entries.contains_key(&key) {
            return Err(Error::LutDuplicate {
                line,
                key: key.to_string(),
            });
        }
        self.entries.insert(key, latency_us);
        Ok(())
    }

    pub fn get(&self, key: &LatencyKey) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&LatencyKey, f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn overhead_us(&self) -> f64 {
        self.overhead_us
    }

    pub fn device_label(&self) -> &str {
        &self.device_label
    }

    /// Parses the CSV form. `device_label` is informational only.
    pub fn from_reader(reader: impl Read, device_label: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut table = LatencyTable {
            device_label: device_label.into(),
            ..Default::default()
        };
        let mut overhead: Option<f64> = None;
        let mut saw_header = false;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::LutMalformed {
                line: e.position().map_or(0, |p| p.line() as usize),
                detail: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.iter().all(str::is_empty) {
                continue;
            }
            if !saw_header {
                if rec.iter().ne(HEADER.iter().copied()) {
                    return Err(Error::LutMalformed {
                        line,
                        detail: format!("expected header `{}`", HEADER.join(",")),
                    });
                }
                saw_header = true;
                continue;
            }
            if rec.len() != HEADER.len() {
                return Err(Error::LutMalformed {
                    line,
                    detail: format!("expected {} fields, found {}", HEADER.len(), rec.len()),
                });
            }
            let int = |i: usize| -> Result<usize> {
                rec[i].parse().map_err(|_| Error::LutMalformed {
                    line,
                    detail: format!("field `{}` = `{}` is not a non-negative integer", HEADER[i], &rec[i]),
                })
            };
            let latency: f64 = rec[6].parse().map_err(|_| Error::LutMalformed {
                line,
                detail: format!("latency `{}` is not a number", &rec[6]),
            })?;
            if &rec[0] == OVERHEAD_OP {
                if overhead.is_some() {
                    return Err(Error::LutDuplicate {
                        line,
                        key: OVERHEAD_OP.into(),
                    });
                }
                if !latency.is_finite() {
                    return Err(Error::LutMalformed {
                        line,
                        detail: format!("overhead {latency} is not finite"),
                    });
                }
                if latency < 0.0 {
                    return Err(Error::LutNegative { line, value: latency });
                }
                overhead = Some(latency);
                continue;
            }
            if rec[0].is_empty() {
                return Err(Error::LutMalformed {
                    line,
                    detail: "empty operator name".into(),
                });
            }
            let key = LatencyKey {
                op: rec[0].to_string(),
                c_in: int(1)?,
                c_out: int(2)?,
                h: int(3)?,
                w: int(4)?,
                stride: int(5)?,
            };
            table.insert_at(line, key, latency)?;
        }
        table.overhead_us = overhead.ok_or(Error::LutNoOverhead)?;
        Ok(table)
    }

    pub fn to_csv(&self) -> String {
        let mut out = HEADER.join(",");
        out.push('\n');
        out.push_str(&format!("{OVERHEAD_OP},0,0,0,0,0,{}\n", self.overhead_us));
        for (k, v) in &self.entries {
            out.push_str(&format!("{},{},{},{},{},{},{}\n", k.op, k.c_in, k.c_out, k.h, k.w, k.stride, v));
        }
        out
    }
}

pub fn load_latency_table(path: impl AsRef<Path>) -> Result<LatencyTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    LatencyTable::from_reader(file, label)
}

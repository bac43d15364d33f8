use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hardware::{CostModel, LatencyTable};
use crate::space::{CellArch, MacroConfig};

/// One row of a comparison table as supplied by the user. Any figure given
/// explicitly overrides the computed one and is printed exactly as written.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportEntry {
    pub label: String,
    #[serde(default)]
    pub arch: Option<CellArch>,
    #[serde(default)]
    pub search_time_hours: Option<f64>,
    #[serde(default)]
    pub accuracy: Option<f64>,
    #[serde(default)]
    pub flops_m: Option<f64>,
    #[serde(default)]
    pub params_m: Option<f64>,
    #[serde(default)]
    pub latency_us: Option<f64>,
    /// Speedups are relative to this entry (default: the first one).
    #[serde(default)]
    pub baseline: bool,
}

/// A number together with whether the user supplied it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Figure {
    pub value: f64,
    pub given: bool,
}

impl Serialize for Figure {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value)
    }
}

impl Figure {
    fn given(value: f64) -> Self {
        Figure { value, given: true }
    }

    fn computed(value: f64) -> Self {
        Figure { value, given: false }
    }

    fn render(&self, decimals: usize) -> String {
        if self.given {
            format!("{}", self.value)
        } else {
            format!("{:.*}", decimals, self.value)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arch: Option<String>,
    pub flops_m: Option<Figure>,
    pub params_m: Option<Figure>,
    pub latency_us: Option<Figure>,
    pub speedup: Option<f64>,
    pub search_time_hours: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub baseline: String,
    pub rows: Vec<ReportRow>,
}

/// Parses entries from JSON-lines text.
pub fn read_entries(reader: impl Read) -> Result<Vec<ReportEntry>> {
    let mut text = String::new();
    let mut reader = reader;
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::BenchParse { line: 0, detail: e.to_string() })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::BenchParse {
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}

/// Builds the comparison: FLOPs and parameters in millions, latency, speedup
/// relative to the baseline, search time and accuracy. Accuracy and search
/// time are never computed, only passed through.
pub fn compare_report(entries: &[ReportEntry], m: &MacroConfig, lut: Option<&LatencyTable>) -> Result<CompareReport> {
    if entries.is_empty() {
        return Err(Error::Config("comparison report needs at least one entry".into()));
    }
    let marked: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].baseline).collect();
    if marked.len() > 1 {
        return Err(Error::Config("more than one entry is marked as baseline".into()));
    }
    let base = marked.first().copied().unwrap_or(0);
    let cost = CostModel::new(m, lut)?;
    let mut rows = Vec::with_capacity(entries.len());
    for (i, e) in entries.iter().enumerate() {
        if let Some(acc) = e.accuracy {
            if !(0.0..=100.0).contains(&acc) {
                return Err(Error::AccuracyRange { line: i + 1, value: acc });
            }
        }
        let computed = e.arch.as_ref().map(|a| cost.breakdown(a)).transpose()?;
        let pick = |given: Option<f64>, calc: Option<f64>| given.map(Figure::given).or(calc.map(Figure::computed));
        rows.push(ReportRow {
            label: e.label.clone(),
            arch: e.arch.map(|a| a.to_string()),
            flops_m: pick(e.flops_m, computed.as_ref().map(|c| c.flops as f64 / 1e6)),
            params_m: pick(e.params_m, computed.as_ref().map(|c| c.params as f64 / 1e6)),
            latency_us: pick(e.latency_us, computed.as_ref().and_then(|c| c.latency_us)),
            speedup: None,
            search_time_hours: e.search_time_hours,
            accuracy: e.accuracy,
        });
    }
    if let Some(lb) = rows[base].latency_us.map(|f| f.value) {
        for r in &mut rows {
            r.speedup = r.latency_us.filter(|l| l.value > 0.0).map(|l| lb / l.value);
        }
    }
    Ok(CompareReport {
        baseline: entries[base].label.clone(),
        rows,
    })
}

/// `3.2345` renders as `3.23×`.
pub fn format_speedup(s: f64) -> String {
    format!("{s:.2}×")
}

impl CompareReport {
    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let header = [
            "Model",
            "FLOPs (M)",
            "Params (M)",
            "Latency (us)",
            "Speedup",
            "Search (h)",
            "ACC (%)",
        ];
        let dash = || "-".to_string();
        let cells: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.label.clone(),
                    r.flops_m.map_or_else(dash, |f| f.render(2)),
                    r.params_m.map_or_else(dash, |f| f.render(3)),
                    r.latency_us.map_or_else(dash, |f| f.render(1)),
                    r.speedup.map_or_else(dash, format_speedup),
                    r.search_time_hours.map_or_else(dash, |v| format!("{v}")),
                    r.accuracy.map_or_else(dash, |v| format!("{v}")),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, row: &[String]| {
            for (j, c) in row.iter().enumerate() {
                let pad = widths[j] - c.chars().count();
                if j == 0 {
                    let _ = write!(out, "{c}{}", " ".repeat(pad));
                } else {
                    let _ = write!(out, "  {}{c}", " ".repeat(pad));
                }
            }
            out.push('\n');
        };
        line(&mut out, &header.map(String::from));
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        line(&mut out, &rule);
        for row in &cells {
            line(&mut out, row);
        }
        out
    }
}

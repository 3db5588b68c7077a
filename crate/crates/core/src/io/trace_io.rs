//! Trace persistence as CSV or JSON lines.
//!
//! Columns: `k, objective, gap, residual, gamma, step_len, modified, wall_nanos`.
//! Reals are written with 17 significant digits, which round-trips every
//! double. `gap` is blank (CSV) or `null` (JSON) while `f*` is unknown.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{IterateRecord, Trace};

pub const TRACE_COLUMNS: [&str; 8] = [
    "k",
    "objective",
    "gap",
    "residual",
    "gamma",
    "step_len",
    "modified",
    "wall_nanos",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    #[default]
    Csv,
    JsonLines,
}

impl fmt::Display for TraceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceFormat::Csv => "csv",
            TraceFormat::JsonLines => "json-lines",
        })
    }
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "json-lines" | "jsonl" => Ok(TraceFormat::JsonLines),
            _ => Err(Error::invalid(format!("unknown trace format `{s}` (csv, json-lines)"))),
        }
    }
}

/// One persisted row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRow {
    pub k: u64,
    pub objective: f64,
    pub gap: Option<f64>,
    pub residual: f64,
    pub gamma: f64,
    pub step_len: f64,
    pub modified: bool,
    pub wall_nanos: u64,
}

impl TraceRow {
    pub fn from_record(r: &IterateRecord, f_star: Option<f64>) -> Self {
        TraceRow {
            k: r.k,
            objective: r.objective,
            gap: f_star.map(|f| r.objective - f),
            residual: r.residual,
            gamma: r.gamma,
            step_len: r.step_len,
            modified: r.modified,
            wall_nanos: r.wall_nanos,
        }
    }

    /// Back to a record; the in-memory `y_gap` is not persisted and comes back NaN.
    pub fn to_record(&self) -> IterateRecord {
        IterateRecord {
            k: self.k,
            objective: self.objective,
            residual: self.residual,
            gamma: self.gamma,
            step_len: self.step_len,
            modified: self.modified,
            wall_nanos: self.wall_nanos,
            y_gap: f64::NAN,
        }
    }

    /// Bitwise equality of every field.
    pub fn bits_eq(&self, other: &TraceRow) -> bool {
        let b = |r: &TraceRow| {
            (
                r.k,
                r.objective.to_bits(),
                r.gap.map(f64::to_bits),
                r.residual.to_bits(),
                r.gamma.to_bits(),
                r.step_len.to_bits(),
                r.modified,
                r.wall_nanos,
            )
        };
        b(self) == b(other)
    }
}

pub fn trace_rows(trace: &Trace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow::from_record(r, trace.f_star))
        .collect()
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>, format: TraceFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows_to(BufWriter::new(file), &trace_rows(trace), format).map_err(|e| Error::io(path, e))
}

pub fn write_rows_to(w: impl Write, rows: &[TraceRow], format: TraceFormat) -> std::io::Result<()> {
    match format {
        TraceFormat::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(TRACE_COLUMNS)?;
            for r in rows {
                out.write_record([
                    r.k.to_string(),
                    real(r.objective),
                    r.gap.map(real).unwrap_or_default(),
                    real(r.residual),
                    real(r.gamma),
                    real(r.step_len),
                    u8::from(r.modified).to_string(),
                    r.wall_nanos.to_string(),
                ])?;
            }
            out.flush()
        }
        TraceFormat::JsonLines => {
            let mut w = w;
            for r in rows {
                // Written by hand so reals keep the fixed 17-digit form.
                writeln!(
                    w,
                    "{{\"k\":{},\"objective\":{},\"gap\":{},\"residual\":{},\"gamma\":{},\"step_len\":{},\"modified\":{},\"wall_nanos\":{}}}",
                    r.k,
                    json_real(r.objective),
                    r.gap.map(json_real).unwrap_or_else(|| "null".into()),
                    json_real(r.residual),
                    json_real(r.gamma),
                    json_real(r.step_len),
                    r.modified,
                    r.wall_nanos
                )?;
            }
            w.flush()
        }
    }
}

fn json_real(v: f64) -> String {
    if v.is_finite() {
        real(v)
    } else {
        "null".into()
    }
}

pub fn read_trace(path: impl AsRef<Path>, format: TraceFormat) -> Result<Vec<TraceRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_rows_from(file, format)
}

pub fn read_rows_from(r: impl Read, format: TraceFormat) -> Result<Vec<TraceRow>> {
    match format {
        TraceFormat::Csv => {
            let mut rd = csv::Reader::from_reader(r);
            let header = rd.headers().map_err(csv_err)?.clone();
            if header.iter().ne(TRACE_COLUMNS.iter().copied()) {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unexpected trace header {:?}", header.iter().collect::<Vec<_>>()),
                });
            }
            let mut rows = Vec::new();
            for (i, rec) in rd.records().enumerate() {
                let line = i + 2;
                let rec = rec.map_err(csv_err)?;
                let num = |j: usize| -> Result<f64> {
                    rec[j].parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("column {} is not a number: `{}`", TRACE_COLUMNS[j], &rec[j]),
                    })
                };
                let int = |j: usize| -> Result<u64> {
                    rec[j].parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("column {} is not an integer: `{}`", TRACE_COLUMNS[j], &rec[j]),
                    })
                };
                let modified = match &rec[6] {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::Parse {
                            line,
                            message: format!("modified must be 0 or 1, got `{other}`"),
                        })
                    }
                };
                rows.push(TraceRow {
                    k: int(0)?,
                    objective: num(1)?,
                    gap: if rec[2].is_empty() { None } else { Some(num(2)?) },
                    residual: num(3)?,
                    gamma: num(4)?,
                    step_len: num(5)?,
                    modified,
                    wall_nanos: int(7)?,
                });
            }
            Ok(rows)
        }
        TraceFormat::JsonLines => {
            let mut rows = Vec::new();
            for (i, line) in BufReader::new(r).lines().enumerate() {
                let line = line.map_err(|e| Error::io("<reader>", e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let row: TraceRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                rows.push(row);
            }
            Ok(rows)
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

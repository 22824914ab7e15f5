//! Report records and their JSON-lines / CSV encodings.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::error::{HarnessError, Result};

/// Version of the record layout; bumped on any field change.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
    NotImplemented,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
            Status::NotImplemented => "not-implemented",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A float that survives JSON: non-finite values become the strings
/// `"inf"`, `"-inf"` and `"nan"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.0;
        if v.is_nan() {
            f.write_str("nan")
        } else if v == f64::INFINITY {
            f.write_str("inf")
        } else if v == f64::NEG_INFINITY {
            f.write_str("-inf")
        } else {
            // same shortest round-trip form serde_json uses
            write!(f, "{}", serde_json::Number::from_f64(v).expect("finite"))
        }
    }
}

fn nums(v: &[f64]) -> Vec<Num> {
    v.iter().map(|x| Num(*x)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridInfo {
    pub resolution: usize,
    pub time_nodes: usize,
}

/// One record per experiment (or per suite check).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub schema_version: u32,
    pub scenario_id: String,
    pub index: usize,
    pub op: String,
    pub status: Status,
    pub value: Option<Num>,
    pub values: Option<Vec<Num>>,
    pub lower: Option<Num>,
    pub upper: Option<Num>,
    pub witness_params: Option<Vec<Num>>,
    pub margin: Option<Num>,
    pub tolerance: Option<Num>,
    pub grid: Option<GridInfo>,
    pub runtime_ms: Option<u64>,
    pub notes: Vec<String>,
}

impl Record {
    pub fn new(scenario_id: &str, index: usize, op: &str) -> Self {
        Record {
            schema_version: SCHEMA_VERSION,
            scenario_id: scenario_id.to_string(),
            index,
            op: op.to_string(),
            status: Status::Pass,
            value: None,
            values: None,
            lower: None,
            upper: None,
            witness_params: None,
            margin: None,
            tolerance: None,
            grid: None,
            runtime_ms: None,
            notes: Vec::new(),
        }
    }

    pub fn status(mut self, s: Status) -> Self {
        self.status = s;
        self
    }

    /// Pass when `ok`, fail otherwise.
    pub fn check(mut self, ok: bool) -> Self {
        self.status = if ok { Status::Pass } else { Status::Fail };
        self
    }

    pub fn value(mut self, v: f64) -> Self {
        self.value = Some(Num(v));
        self
    }

    pub fn values(mut self, v: &[f64]) -> Self {
        self.values = Some(nums(v));
        self
    }

    pub fn bounds(mut self, lower: f64, upper: f64) -> Self {
        self.lower = Some(Num(lower));
        self.upper = Some(Num(upper));
        self
    }

    pub fn witness(mut self, p: &[f64]) -> Self {
        self.witness_params = Some(nums(p));
        self
    }

    pub fn margin(mut self, m: f64) -> Self {
        self.margin = Some(Num(m));
        self
    }

    pub fn tolerance(mut self, t: f64) -> Self {
        self.tolerance = Some(Num(t));
        self
    }

    pub fn grid(mut self, resolution: usize, time_nodes: usize) -> Self {
        self.grid = Some(GridInfo { resolution, time_nodes });
        self
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let mut s = format!("[{}] {} #{} {}", self.status, self.scenario_id, self.index, self.op);
        if let Some(v) = self.value {
            s.push_str(&format!(" value={v}"));
        }
        if let (Some(l), Some(u)) = (self.lower, self.upper) {
            s.push_str(&format!(" bounds=[{l}, {u}]"));
        }
        if let Some(m) = self.margin {
            s.push_str(&format!(" margin={m}"));
        }
        if self.status == Status::Fail {
            if let Some(n) = self.notes.last() {
                s.push_str(&format!(" ({n})"));
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
    Both,
}

pub fn to_jsonl(records: &[Record]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("records serialize");
        out.push(b'\n');
    }
    out
}

const CSV_HEADER: [&str; 16] = [
    "schema_version",
    "scenario_id",
    "index",
    "op",
    "status",
    "value",
    "values",
    "lower",
    "upper",
    "witness_params",
    "margin",
    "tolerance",
    "grid_resolution",
    "grid_time_nodes",
    "runtime_ms",
    "notes",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn joined(v: &Option<Vec<Num>>) -> String {
    v.as_ref()
        .map(|xs| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"))
        .unwrap_or_default()
}

pub fn to_csv(records: &[Record]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.schema_version.to_string(),
            r.scenario_id.clone(),
            r.index.to_string(),
            r.op.clone(),
            r.status.to_string(),
            opt(&r.value),
            joined(&r.values),
            opt(&r.lower),
            opt(&r.upper),
            joined(&r.witness_params),
            opt(&r.margin),
            opt(&r.tolerance),
            opt(&r.grid.map(|g| g.resolution)),
            opt(&r.grid.map(|g| g.time_nodes)),
            opt(&r.runtime_ms),
            r.notes.join(" | "),
        ])?;
    }
    w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
}

/// A CSV table of plot data, e.g. an oscillation curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotData {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| Num(*v).to_string()))?;
        }
        w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Writes `<stem>.jsonl` and/or `<stem>.csv` under `dir`.
pub fn write_records(dir: &Path, stem: &str, records: &[Record], format: Format) -> Result<()> {
    if matches!(format, Format::Jsonl | Format::Both) {
        write_file(&dir.join(format!("{stem}.jsonl")), &to_jsonl(records))?;
    }
    if matches!(format, Format::Csv | Format::Both) {
        write_file(&dir.join(format!("{stem}.csv")), &to_csv(records)?)?;
    }
    Ok(())
}

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::metrics::FailureCategory;
use super::suite::SuiteConfig;
use crate::error::MetricsError;
use crate::geometry::Feature;

pub const REPORT_FORMAT: u32 = 1;

/// How the rates are counted; frozen into every report.
pub const RATE_DEFINITIONS: &str = "r_r: distinct rooms entered after exploration / scene rooms; \
r_c: distinct carriers whose inspection began / scene carriers; \
r_i: distinct (carrier, feature) placements with a detection check / non-empty placements in the scene; \
not found: all 100";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    #[default]
    Trial,
    Plan,
}

/// One trial or one ablation plan run. Fields that do not apply are empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub kind: RowKind,
    pub scene_index: usize,
    pub scene: String,
    /// Strategy for trials, sorting mode for plan runs.
    pub group: String,
    pub seed: u64,
    pub target: String,
    pub carrier: Option<String>,
    pub feature: Option<Feature>,
    pub found: Option<bool>,
    pub r_r: Option<f64>,
    pub r_c: Option<f64>,
    pub r_i: Option<f64>,
    pub osr: Option<f64>,
    pub ee_ratio: Option<f64>,
    pub ch_ratio: Option<f64>,
    pub time_ratio: Option<f64>,
    pub time: Option<f64>,
    pub chassis_length: Option<f64>,
    pub ee_length: Option<f64>,
    pub ee_poses: Option<usize>,
    pub failure: Option<FailureCategory>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    /// Rows with a value.
    pub n: usize,
    pub mean: f64,
    pub median: f64,
}

/// Sums in row order, so recomputation from the same rows is bit-exact.
pub fn stat(values: impl IntoIterator<Item = f64>) -> Option<Stat> {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    v.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    Some(Stat { n, mean, median })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub kind: RowKind,
    pub group: String,
    pub rows: usize,
    pub found: usize,
    pub crashed: usize,
    pub osr: Option<Stat>,
    pub r_r: Option<Stat>,
    pub r_c: Option<Stat>,
    pub r_i: Option<Stat>,
    pub ee_ratio: Option<Stat>,
    pub ch_ratio: Option<Stat>,
    pub time_ratio: Option<Stat>,
    pub time: Option<Stat>,
}

/// One aggregate per (kind, group) in order of first appearance.
pub fn aggregate(rows: &[Row]) -> Vec<Aggregate> {
    let mut keys: Vec<(RowKind, &str)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.kind, r.group.as_str())) {
            keys.push((r.kind, r.group.as_str()));
        }
    }
    keys.into_iter()
        .map(|(kind, group)| {
            let g: Vec<&Row> = rows.iter().filter(|r| r.kind == kind && r.group == group).collect();
            let col = |f: fn(&Row) -> Option<f64>| stat(g.iter().filter_map(|r| f(r)));
            Aggregate {
                kind,
                group: group.to_string(),
                rows: g.len(),
                found: g.iter().filter(|r| r.found == Some(true)).count(),
                crashed: g.iter().filter(|r| r.failure == Some(FailureCategory::Crash)).count(),
                osr: col(|r| r.osr),
                r_r: col(|r| r.r_r),
                r_c: col(|r| r.r_c),
                r_i: col(|r| r.r_i),
                ee_ratio: col(|r| r.ee_ratio),
                ch_ratio: col(|r| r.ch_ratio),
                time_ratio: col(|r| r.time_ratio),
                time: col(|r| r.time),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub format: u32,
    pub definitions: String,
    pub suite: SuiteConfig,
    pub rows: Vec<Row>,
    pub aggregates: Vec<Aggregate>,
}

impl BenchReport {
    pub fn new(suite: SuiteConfig, rows: Vec<Row>) -> Self {
        let aggregates = aggregate(&rows);
        Self { format: REPORT_FORMAT, definitions: RATE_DEFINITIONS.into(), suite, rows, aggregates }
    }

    pub fn aggregate(&self, group: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.group == group)
    }

    /// Checks that the stored aggregates equal those recomputed from the rows, bit for bit.
    pub fn verify(&self) -> Result<(), MetricsError> {
        let fresh = aggregate(&self.rows);
        if fresh.len() != self.aggregates.len() {
            return Err(MetricsError::Report(format!(
                "{} aggregates stored, {} recomputed from rows",
                self.aggregates.len(),
                fresh.len()
            )));
        }
        for (a, b) in self.aggregates.iter().zip(&fresh) {
            if serde_json::to_string(a).ok() != serde_json::to_string(b).ok() {
                return Err(MetricsError::Report(format!("aggregate `{}` does not match its rows", a.group)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        serde_json::from_str(text).map_err(|e| MetricsError::Report(format!("report parse error: {e}")))
    }

    pub fn write_csv(&self, w: impl Write) -> Result<(), MetricsError> {
        write_rows_csv(&self.rows, w)
    }
}

pub const CSV_COLUMNS: [&str; 22] = [
    "kind",
    "scene_index",
    "scene",
    "group",
    "seed",
    "target",
    "carrier",
    "feature",
    "found",
    "r_r",
    "r_c",
    "r_i",
    "osr",
    "ee_ratio",
    "ch_ratio",
    "time_ratio",
    "time",
    "chassis_length",
    "ee_length",
    "ee_poses",
    "failure",
    "error",
];

fn csv_err(e: impl std::fmt::Display) -> MetricsError {
    MetricsError::Report(format!("csv: {e}"))
}

/// One row per trial with a header line in [`CSV_COLUMNS`] order; empty cells for absent values.
pub fn write_rows_csv(rows: &[Row], w: impl Write) -> Result<(), MetricsError> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in rows {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

/// Empty cells read back as absent, so an empty text value does not round-trip.
pub fn read_rows_csv(r: impl Read) -> Result<Vec<Row>, MetricsError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(MetricsError::Report("unexpected CSV columns".into()));
    }
    rdr.deserialize().map(|row| row.map_err(csv_err)).collect()
}

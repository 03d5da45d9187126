//! JSON and plain-text reports for benchmarks and single registrations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::{BenchReport, REFERENCE_LABEL};
use crate::error::{RegError, Result};
use crate::geometry::RigidTransform;
use crate::kalman::RegistrationResult;
use crate::method::Method;

use super::MM_PER_M;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: Meta,
    pub rows: Vec<Row>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference_rows: Vec<ReferenceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub seed: u64,
    pub version: String,
    /// Unit of every length field.
    pub unit: String,
    pub time_unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl Meta {
    fn new(seed: u64) -> Self {
        Meta {
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            unit: "mm".into(),
            time_unit: "ms".into(),
            points: None,
            samples: None,
        }
    }
}

/// Failed aggregates (no successful sample) are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub method: String,
    pub scenario: String,
    #[serde(with = "nan_as_null")]
    pub rmse_mean_mm: f64,
    #[serde(with = "nan_as_null")]
    pub rmse_stddev_mm: f64,
    #[serde(with = "nan_as_null")]
    pub time_mean_ms: f64,
    pub samples: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub method: String,
    pub scenario: String,
    pub rmse_mm: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformEntry {
    /// Row-major rotation.
    pub r: [f64; 9],
    pub t_mm: [f64; 3],
    pub s: f64,
}

impl From<&RigidTransform> for TransformEntry {
    fn from(t: &RigidTransform) -> Self {
        TransformEntry {
            r: t.rotation.to_row_major(),
            t_mm: std::array::from_fn(|i| t.translation[i] * MM_PER_M),
            s: t.scale,
        }
    }
}

impl Report {
    pub fn from_bench(b: &BenchReport) -> Self {
        let mut meta = Meta::new(b.seed);
        meta.points = Some(b.n_points);
        meta.samples = Some(b.n_samples);
        Report {
            meta,
            rows: b
                .rows
                .iter()
                .map(|r| Row {
                    method: r.method.to_string(),
                    scenario: r.scenario.clone(),
                    rmse_mean_mm: r.rmse_mean_mm,
                    rmse_stddev_mm: r.rmse_stddev_mm,
                    time_mean_ms: r.time_mean_ms,
                    samples: r.samples,
                    failures: r.failures,
                })
                .collect(),
            reference_rows: b
                .reference_rows
                .iter()
                .map(|r| ReferenceEntry {
                    method: r.method.to_string(),
                    scenario: r.scenario.to_string(),
                    rmse_mm: r.rmse_mm,
                    note: REFERENCE_LABEL.to_string(),
                })
                .collect(),
            transform: None,
        }
    }

    /// One row for a single run over `points` correspondences from `label`,
    /// plus the recovered transform.
    pub fn from_registration(
        method: Method,
        label: &str,
        points: usize,
        res: &RegistrationResult,
        time_ms: f64,
        seed: u64,
    ) -> Self {
        let mut meta = Meta::new(seed);
        meta.points = Some(points);
        Report {
            meta,
            rows: vec![Row {
                method: method.to_string(),
                scenario: label.to_string(),
                rmse_mean_mm: res.rmse * MM_PER_M,
                rmse_stddev_mm: 0.0,
                time_mean_ms: time_ms,
                samples: 1,
                failures: 0,
            }],
            reference_rows: Vec::new(),
            transform: Some(TransformEntry::from(&res.transform)),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| RegError::Schema(format!("cannot serialize report: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| RegError::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    /// Column-aligned table; reference rows and the transform follow in
    /// their own sections.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# seed {}  unit {}  time {}",
            self.meta.seed, self.meta.unit, self.meta.time_unit
        );
        let mut cells = vec![[
            "method",
            "scenario",
            "rmse_mean_mm",
            "rmse_stddev_mm",
            "time_mean_ms",
            "samples",
            "failures",
        ]
        .map(String::from)];
        for r in &self.rows {
            cells.push([
                r.method.clone(),
                r.scenario.clone(),
                fmt_num(r.rmse_mean_mm, 4),
                fmt_num(r.rmse_stddev_mm, 4),
                fmt_num(r.time_mean_ms, 3),
                r.samples.to_string(),
                r.failures.to_string(),
            ]);
        }
        push_aligned(&mut out, &cells, 2);
        if !self.reference_rows.is_empty() {
            let _ = writeln!(out, "\n# {}", self.reference_rows[0].note);
            let mut refs = vec![["method", "scenario", "rmse_mm"].map(String::from)];
            refs.extend(
                self.reference_rows
                    .iter()
                    .map(|r| [r.method.clone(), r.scenario.clone(), fmt_num(r.rmse_mm, 1)]),
            );
            push_aligned(&mut out, &refs, 2);
        }
        if let Some(t) = &self.transform {
            let _ = writeln!(out, "\nr    = {:?}", t.r);
            let _ = writeln!(out, "t_mm = {:?}", t.t_mm);
            let _ = writeln!(out, "s    = {}", t.s);
        }
        out
    }
}

/// Appends rows with the first `left` columns left-aligned, the rest right-aligned.
fn push_aligned<const N: usize>(out: &mut String, rows: &[[String; N]], left: usize) {
    let mut widths = [0usize; N];
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i < left {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
}

fn fmt_num(v: f64, decimals: usize) -> String {
    if v.is_finite() {
        format!("{v:.decimals$}")
    } else {
        "-".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = RegError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "table" => Ok(ReportFormat::Table),
            other => Err(RegError::InvalidArgument(format!(
                "unknown report format '{other}' (json|table)"
            ))),
        }
    }
}

impl ReportFormat {
    /// `json` for `*.json`, `table` otherwise.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Table,
        }
    }
}

pub fn write_report(report: &Report, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Json => report.to_json()? + "\n",
        ReportFormat::Table => report.to_table(),
    };
    fs::write(path, text).map_err(|e| RegError::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| RegError::io(path, e))?;
    Report::from_json(&text)
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

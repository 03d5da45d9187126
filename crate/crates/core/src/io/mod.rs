//! File formats and configuration behind the `regfilt` CLI.

mod config;
mod correspondences;
mod ply;
mod report;

use std::fs;
use std::path::Path;

pub use config::{parse_floats, parse_intrinsics, RunConfig, CONFIG_ENV, DEFAULT_SEED, KEYS};
pub use correspondences::{
    format_correspondences, load_correspondences, parse_correspondences, write_correspondences, MM_PER_M,
};
pub use ply::{load_index_pairs, load_ply_vertices, pair_clouds, parse_index_pairs, parse_ply_vertices};
pub use report::{read_report, write_report, Meta, ReferenceEntry, Report, ReportFormat, Row, TransformEntry};

use crate::error::{RegError, Result};

/// Depth samples separated by commas, whitespace or newlines; `#` starts a
/// comment. Works for plain lists and for CSV depth grids.
pub fn parse_depths(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default();
        for tok in line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let v: f64 = tok.parse().map_err(|_| RegError::Parse {
                line: i + 1,
                msg: format!("cannot parse depth '{tok}'"),
            })?;
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(RegError::EmptyInput("depth file has no samples"));
    }
    Ok(out)
}

pub fn load_depths(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| RegError::io(path, e))?;
    parse_depths(&text)
}

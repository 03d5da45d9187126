//! Correspondence CSV: `sx,sy,sz,tx,ty,tz[,ssx,ssy,ssz]`, millimeters in the
//! file, meters in memory. Columns are matched by header name, so their order
//! is free.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{RegError, Result};
use crate::geometry::{Correspondence, Point3};

pub const MM_PER_M: f64 = 1000.0;

const POSITION_COLUMNS: [&str; 6] = ["sx", "sy", "sz", "tx", "ty", "tz"];
const SIGMA_COLUMNS: [&str; 3] = ["ssx", "ssy", "ssz"];

pub fn load_correspondences(path: impl AsRef<Path>) -> Result<Vec<Correspondence>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| RegError::io(path, e))?;
    parse_correspondences(file)
}

/// Parses correspondence CSV from any reader. Fails with
/// [`RegError::EmptyInput`] when the file has a header but no rows.
pub fn parse_correspondences(reader: impl Read) -> Result<Vec<Correspondence>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(RegError::Schema("missing header row".into()));
    }
    let columns = ColumnMap::from_header(&header)?;

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(RegError::Schema(format!(
                "line {line}: expected {} columns, found {}",
                header.len(),
                record.len()
            )));
        }
        let field = |i: usize| -> Result<f64> {
            let raw = &record[i];
            let v: f64 = raw.parse().map_err(|_| RegError::Parse {
                line,
                msg: format!("column '{}': cannot parse '{raw}' as a number", &header[i]),
            })?;
            if !v.is_finite() {
                return Err(RegError::Parse {
                    line,
                    msg: format!("column '{}': value must be finite", &header[i]),
                });
            }
            Ok(v / MM_PER_M)
        };
        let p = columns.position.iter().map(|&i| field(i)).collect::<Result<Vec<_>>>()?;
        let source = Point3::new(p[0], p[1], p[2]);
        let target = Point3::new(p[3], p[4], p[5]);
        let corr = match columns.sigma {
            Some(idx) => {
                let s = idx.iter().map(|&i| field(i)).collect::<Result<Vec<_>>>()?;
                let sigma = Vector3::new(s[0], s[1], s[2]);
                Correspondence::with_sigma(source, target, sigma).map_err(|e| RegError::Parse {
                    line,
                    msg: e.to_string(),
                })?
            }
            None => Correspondence::new(source, target),
        };
        out.push(corr);
    }
    if out.is_empty() {
        return Err(RegError::EmptyInput("correspondence file has no rows"));
    }
    Ok(out)
}

struct ColumnMap {
    position: [usize; 6],
    sigma: Option<[usize; 3]>,
}

impl ColumnMap {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let names: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
        if names.len() != 6 && names.len() != 9 {
            return Err(RegError::Schema(format!(
                "expected 6 or 9 columns, header has {} ({})",
                names.len(),
                names.join(",")
            )));
        }
        for n in &names {
            if !POSITION_COLUMNS.contains(&n.as_str()) && !SIGMA_COLUMNS.contains(&n.as_str()) {
                return Err(RegError::Schema(format!("unknown column '{n}'")));
            }
            if names.iter().filter(|m| *m == n).count() > 1 {
                return Err(RegError::Schema(format!("duplicate column '{n}'")));
            }
        }
        let find = |name: &str| {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| RegError::Schema(format!("missing column '{name}'")))
        };
        let mut position = [0; 6];
        for (slot, name) in position.iter_mut().zip(POSITION_COLUMNS) {
            *slot = find(name)?;
        }
        let sigma = if names.len() == 9 {
            let mut s = [0; 3];
            for (slot, name) in s.iter_mut().zip(SIGMA_COLUMNS) {
                *slot = find(name)?;
            }
            Some(s)
        } else {
            None
        };
        Ok(ColumnMap { position, sigma })
    }
}

fn csv_error(e: csv::Error, fallback_line: usize) -> RegError {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    match e.kind() {
        csv::ErrorKind::Io(_) => RegError::Parse {
            line,
            msg: format!("read failed: {e}"),
        },
        _ => RegError::Parse {
            line,
            msg: e.to_string(),
        },
    }
}

/// Writes the canonical CSV: 9 columns when every pair carries a sigma, 6 otherwise.
pub fn write_correspondences(path: impl AsRef<Path>, corrs: &[Correspondence]) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| RegError::io(path, e))?;
    let mut buf = Vec::new();
    format_correspondences(&mut buf, corrs).map_err(|e| RegError::io(path, e))?;
    file.write_all(&buf).map_err(|e| RegError::io(path, e))
}

pub fn format_correspondences(w: &mut impl Write, corrs: &[Correspondence]) -> std::io::Result<()> {
    let with_sigma = !corrs.is_empty() && corrs.iter().all(|c| c.sigma.is_some());
    let mut header: Vec<&str> = POSITION_COLUMNS.to_vec();
    if with_sigma {
        header.extend(SIGMA_COLUMNS);
    }
    writeln!(w, "{}", header.join(","))?;
    for c in corrs {
        let mut values = vec![c.source.x, c.source.y, c.source.z, c.target.x, c.target.y, c.target.z];
        if let (true, Some(s)) = (with_sigma, c.sigma) {
            values.extend(s.iter());
        }
        let cells: Vec<String> = values.iter().map(|v| (v * MM_PER_M).to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

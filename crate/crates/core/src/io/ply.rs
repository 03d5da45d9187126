//! ASCII PLY vertex loader and index-pair files, for building correspondences
//! from two point clouds. Only the `x`, `y`, `z` vertex properties are read;
//! other properties and elements are skipped.

use std::fs;
use std::path::Path;

use crate::error::{RegError, Result};
use crate::geometry::{Correspondence, Point3};

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
}

pub fn load_ply_vertices(path: impl AsRef<Path>) -> Result<Vec<Point3>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| RegError::io(path, e))?;
    parse_ply_vertices(&text)
}

pub fn parse_ply_vertices(text: &str) -> Result<Vec<Point3>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(RegError::Schema("not a PLY file (missing 'ply' magic)".into())),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| RegError::Schema("PLY header has no end_header".into()))?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                if words.next() != Some("ascii") {
                    return Err(RegError::Schema("only ASCII PLY is supported".into()));
                }
                saw_format = true;
            }
            Some("element") => {
                let name = words.next().unwrap_or_default().to_string();
                let count = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| RegError::Parse {
                        line: line_no,
                        msg: format!("bad element line '{line}'"),
                    })?;
                elements.push(Element {
                    name,
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements.last_mut().ok_or_else(|| RegError::Parse {
                    line: line_no,
                    msg: "property before any element".into(),
                })?;
                // `property list <count> <item> <name>` or `property <type> <name>`
                let name = line.split_whitespace().last().unwrap_or_default().to_string();
                element.properties.push(name);
            }
            Some(other) => {
                return Err(RegError::Parse {
                    line: line_no,
                    msg: format!("unexpected header keyword '{other}'"),
                })
            }
        }
    }
    if !saw_format {
        return Err(RegError::Schema("PLY header has no format line".into()));
    }

    let mut body = lines.filter(|(_, l)| !l.is_empty());
    for element in &elements {
        if element.name != "vertex" {
            for _ in 0..element.count {
                body.next();
            }
            continue;
        }
        let index = |axis: &str| {
            element
                .properties
                .iter()
                .position(|p| p == axis)
                .ok_or_else(|| RegError::Schema(format!("vertex element has no '{axis}' property")))
        };
        let (ix, iy, iz) = (index("x")?, index("y")?, index("z")?);
        let mut points = Vec::with_capacity(element.count);
        for _ in 0..element.count {
            let (line_no, line) = body.next().ok_or_else(|| {
                RegError::Schema(format!("PLY ends after {} of {} vertices", points.len(), element.count))
            })?;
            let values: Vec<&str> = line.split_whitespace().collect();
            if values.len() < element.properties.len() {
                return Err(RegError::Parse {
                    line: line_no,
                    msg: format!("expected {} values, found {}", element.properties.len(), values.len()),
                });
            }
            let num = |i: usize| -> Result<f64> {
                values[i]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| RegError::Parse {
                        line: line_no,
                        msg: format!("bad coordinate '{}'", values[i]),
                    })
            };
            points.push(Point3::new(num(ix)?, num(iy)?, num(iz)?));
        }
        return Ok(points);
    }
    Err(RegError::Schema("PLY file has no vertex element".into()))
}

/// Index pairs `source_index target_index`, one per line, separated by
/// whitespace or a comma. `#` starts a comment.
pub fn parse_index_pairs(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: Option<Vec<usize>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed.as_deref() {
            Some([a, b]) => pairs.push((*a, *b)),
            _ => {
                return Err(RegError::Parse {
                    line: i + 1,
                    msg: format!("expected two indices, got '{line}'"),
                })
            }
        }
    }
    Ok(pairs)
}

pub fn load_index_pairs(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| RegError::io(path, e))?;
    parse_index_pairs(&text)
}

/// Pairs up two clouds. Coordinates are multiplied by `to_meters`.
pub fn pair_clouds(
    source: &[Point3],
    target: &[Point3],
    pairs: &[(usize, usize)],
    to_meters: f64,
) -> Result<Vec<Correspondence>> {
    if pairs.is_empty() {
        return Err(RegError::EmptyInput("index-pair file has no pairs"));
    }
    pairs
        .iter()
        .map(|&(i, j)| {
            let s = source.get(i).ok_or_else(|| {
                RegError::InvalidArgument(format!("source index {i} out of range ({} points)", source.len()))
            })?;
            let t = target.get(j).ok_or_else(|| {
                RegError::InvalidArgument(format!("target index {j} out of range ({} points)", target.len()))
            })?;
            Ok(Correspondence::new(s * to_meters, t * to_meters))
        })
        .collect()
}

//! SMESH: a line-oriented text record of every organ's B-spline surface.
//!
//! ```text
//! SMESH 1
//! unit cm
//! family monocot
//! fingerprint <hex>
//! organs <count>
//! organ <path>
//! kind <culm|stalk|leaf|petiole|petiolule|leaflet>
//! degree <p> <q>
//! size <rows> <columns>
//! knots_u <n>
//! <n knots>
//! knots_v <m>
//! <m knots>
//! points <rows * columns>
//! <x> <y> <z> <w>          (one line per point, row-major, w = 1)
//! end
//! ```
//!
//! Reals are written with 17 significant digits, so reading restores every
//! value exactly. Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use thiserror::Error;

use crate::assembler::{OrganKind, OrganSurface, PlantModel};
use crate::spline::{BSplineSurface, KnotVector};
use crate::{Family, Vec3};

pub const SMESH_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmeshError {
    #[error("unsupported SMESH version {found} (expected {SMESH_VERSION})")]
    Version { found: String },
    #[error("truncated SMESH document in {organ}: expected {expected}")]
    Truncated { organ: String, expected: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmeshDocument {
    pub version: u32,
    pub unit: String,
    pub family: Family,
    pub fingerprint: String,
    pub organs: Vec<OrganSurface>,
}

impl SmeshDocument {
    pub fn into_model(self) -> PlantModel {
        PlantModel { family: self.family, organs: self.organs, fingerprint: self.fingerprint }
    }
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_smesh(model: &PlantModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "SMESH {SMESH_VERSION}");
    let _ = writeln!(s, "unit cm");
    let _ = writeln!(s, "family {}", model.family.as_str());
    let _ = writeln!(s, "fingerprint {}", model.fingerprint);
    let _ = writeln!(s, "organs {}", model.organs.len());
    for organ in &model.organs {
        let surf = &organ.surface;
        let (p, q) = surf.degrees();
        let (rows, cols) = surf.grid_size();
        let _ = writeln!(s, "organ {}", organ.path);
        let _ = writeln!(s, "kind {}", organ.kind.as_str());
        let _ = writeln!(s, "degree {p} {q}");
        let _ = writeln!(s, "size {rows} {cols}");
        for (label, knots) in [("knots_u", surf.knots_u()), ("knots_v", surf.knots_v())] {
            let _ = writeln!(s, "{label} {}", knots.len());
            let line: Vec<String> = knots.as_slice().iter().map(|&k| real(k)).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        let _ = writeln!(s, "points {}", rows * cols);
        for c in surf.control_points() {
            let _ = writeln!(s, "{} {} {} 1", real(c.x), real(c.y), real(c.z));
        }
        let _ = writeln!(s, "end");
    }
    s
}

struct Reader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    organ: String,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self { lines: text.lines().enumerate().peekable(), organ: "header".into() }
    }

    fn next(&mut self, expected: &str) -> Result<(usize, &'a str), SmeshError> {
        for (i, line) in self.lines.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok((i + 1, t));
            }
        }
        Err(SmeshError::Truncated { organ: self.organ.clone(), expected: expected.into() })
    }

    /// `key value...` line; returns the remainder after the key.
    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str), SmeshError> {
        let (line, text) = self.next(&format!("`{key}`"))?;
        match text.split_once(char::is_whitespace) {
            Some((k, rest)) if k == key => Ok((line, rest.trim())),
            _ if text == key => Ok((line, "")),
            _ => Err(SmeshError::Malformed { line, message: format!("expected `{key}`, found `{text}`") }),
        }
    }
}

fn numbers<T: std::str::FromStr>(text: &str, line: usize) -> Result<Vec<T>, SmeshError>
where
    T::Err: std::fmt::Display,
{
    text.split_whitespace()
        .map(|w| w.parse::<T>().map_err(|e| SmeshError::Malformed { line, message: format!("`{w}`: {e}") }))
        .collect()
}

fn exact<T: std::str::FromStr, const N: usize>(text: &str, line: usize) -> Result<[T; N], SmeshError>
where
    T::Err: std::fmt::Display,
{
    let v = numbers::<T>(text, line)?;
    let len = v.len();
    v.try_into()
        .map_err(|_| SmeshError::Malformed { line, message: format!("expected {N} values, found {len}") })
}

pub fn read_smesh(text: &str) -> Result<SmeshDocument, SmeshError> {
    let mut r = Reader::new(text);
    let (_, version) = r.keyed("SMESH")?;
    if version.parse::<u32>() != Ok(SMESH_VERSION) {
        return Err(SmeshError::Version { found: version.to_string() });
    }
    let unit = r.keyed("unit")?.1.to_string();
    let (line, family) = r.keyed("family")?;
    let family = match family {
        "monocot" => Family::Monocot,
        "dicot" => Family::Dicot,
        other => return Err(SmeshError::Malformed { line, message: format!("unknown family `{other}`") }),
    };
    let fingerprint = r.keyed("fingerprint")?.1.to_string();
    let (line, count) = r.keyed("organs")?;
    let [count] = exact::<usize, 1>(count, line)?;

    let mut organs = Vec::with_capacity(count);
    for k in 0..count {
        r.organ = match organs.last() {
            Some(OrganSurface { path, .. }) => format!("record {k} (after `{path}`)"),
            None => format!("record {k}"),
        };
        let path = r.keyed("organ")?.1.to_string();
        r.organ = path.clone();
        let (line, kind) = r.keyed("kind")?;
        let kind = OrganKind::parse(kind)
            .ok_or_else(|| SmeshError::Malformed { line, message: format!("unknown organ kind `{kind}`") })?;
        let (line, d) = r.keyed("degree")?;
        let [p, q] = exact::<usize, 2>(d, line)?;
        let (line, sz) = r.keyed("size")?;
        let [rows, cols] = exact::<usize, 2>(sz, line)?;
        let mut knots = Vec::new();
        for key in ["knots_u", "knots_v"] {
            let (line, n) = r.keyed(key)?;
            let [n] = exact::<usize, 1>(n, line)?;
            let (line, values) = r.next(&format!("{n} {key} values"))?;
            let values = numbers::<f64>(values, line)?;
            if values.len() != n {
                return Err(SmeshError::Malformed {
                    line,
                    message: format!("{key}: expected {n} values, found {}", values.len()),
                });
            }
            let kv = KnotVector::new(values).map_err(|e| SmeshError::Malformed { line, message: e.to_string() })?;
            knots.push(kv);
        }
        let (line, n) = r.keyed("points")?;
        let [n] = exact::<usize, 1>(n, line)?;
        if n != rows * cols {
            return Err(SmeshError::Malformed { line, message: format!("{n} points for a {rows}x{cols} grid") });
        }
        let mut grid = vec![Vec::with_capacity(cols); rows];
        for i in 0..n {
            let (line, pt) = r.next(&format!("{} more control points", n - i))?;
            let [x, y, z, w] = exact::<f64, 4>(pt, line)?;
            if w != 1.0 {
                return Err(SmeshError::Malformed { line, message: format!("weight {w} (only 1 is supported)") });
            }
            grid[i / cols].push(Vec3::new(x, y, z));
        }
        r.keyed("end")?;
        let kv = knots.pop().expect("two knot vectors");
        let ku = knots.pop().expect("two knot vectors");
        let surface = BSplineSurface::new(path.clone(), p, q, ku, kv, grid)
            .map_err(|e| SmeshError::Malformed { line, message: format!("{path}: {e}") })?;
        organs.push(OrganSurface { path, kind, surface });
    }
    Ok(SmeshDocument { version: SMESH_VERSION, unit, family, fingerprint, organs })
}

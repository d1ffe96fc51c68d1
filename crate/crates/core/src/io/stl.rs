//! STL triangle meshes. Coordinates are written in centimetres, unchanged.

use std::io::Write;

use thiserror::Error;

use crate::spline::TriangleMesh;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StlMode {
    #[default]
    Binary,
    Ascii,
}

impl std::str::FromStr for StlMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(StlMode::Binary),
            "ascii" => Ok(StlMode::Ascii),
            other => Err(format!("unknown STL mode `{other}` (binary|ascii)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum StlError {
    #[error("truncated binary STL: {0}")]
    Truncated(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

const HEADER: &[u8] = b"phyllo binary STL, units: cm";

pub fn write_stl<W: Write>(mesh: &TriangleMesh, mode: StlMode, name: &str, out: &mut W) -> std::io::Result<()> {
    match mode {
        StlMode::Binary => write_binary(mesh, out),
        StlMode::Ascii => write_ascii(mesh, name, out),
    }
}

pub fn stl_bytes(mesh: &TriangleMesh, mode: StlMode, name: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangles.len());
    write_stl(mesh, mode, name, &mut out).expect("writing to a Vec cannot fail");
    out
}

fn write_binary<W: Write>(mesh: &TriangleMesh, out: &mut W) -> std::io::Result<()> {
    let mut header = [0u8; 80];
    header[..HEADER.len()].copy_from_slice(HEADER);
    out.write_all(&header)?;
    out.write_all(&(mesh.triangles.len() as u32).to_le_bytes())?;
    let mut record = [0u8; 50];
    for t in 0..mesh.triangles.len() {
        let vectors = std::iter::once(mesh.normals[t]).chain(mesh.triangle(t));
        for (k, v) in vectors.enumerate() {
            for (c, x) in v.iter().enumerate() {
                let at = 12 * k + 4 * c;
                record[at..at + 4].copy_from_slice(&(*x as f32).to_le_bytes());
            }
        }
        out.write_all(&record)?;
    }
    Ok(())
}

fn write_ascii<W: Write>(mesh: &TriangleMesh, name: &str, out: &mut W) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "solid {name}")?;
    for t in 0..mesh.triangles.len() {
        let n = mesh.normals[t];
        writeln!(out, "  facet normal {:e} {:e} {:e}", n.x as f32, n.y as f32, n.z as f32)?;
        writeln!(out, "    outer loop")?;
        for v in mesh.triangle(t) {
            writeln!(out, "      vertex {:e} {:e} {:e}", v.x as f32, v.y as f32, v.z as f32)?;
        }
        writeln!(out, "    endloop")?;
        writeln!(out, "  endfacet")?;
    }
    writeln!(out, "endsolid {name}")?;
    out.flush()
}

/// Facets of an STL file as `(normal, vertices)`, binary or ASCII.
pub fn read_stl(bytes: &[u8]) -> Result<Vec<(Vec3, [Vec3; 3])>, StlError> {
    if bytes.len() >= 84 {
        let count = u32::from_le_bytes(bytes[80..84].try_into().expect("4 bytes")) as usize;
        if bytes.len() == 84 + 50 * count {
            return Ok(read_binary(&bytes[84..], count));
        }
    }
    if bytes.starts_with(b"solid") {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| StlError::Syntax { line: 0, message: format!("not UTF-8: {e}") })?;
        return read_ascii(text);
    }
    Err(StlError::Truncated(format!("{} bytes do not match the declared triangle count", bytes.len())))
}

fn read_binary(body: &[u8], count: usize) -> Vec<(Vec3, [Vec3; 3])> {
    let f = |rec: &[u8], k: usize| {
        let g = |c: usize| f32::from_le_bytes(rec[12 * k + 4 * c..12 * k + 4 * c + 4].try_into().unwrap()) as f64;
        Vec3::new(g(0), g(1), g(2))
    };
    body.chunks_exact(50)
        .take(count)
        .map(|rec| (f(rec, 0), [f(rec, 1), f(rec, 2), f(rec, 3)]))
        .collect()
}

fn read_ascii(text: &str) -> Result<Vec<(Vec3, [Vec3; 3])>, StlError> {
    let mut facets = Vec::new();
    let mut normal = Vec3::zeros();
    let mut verts: Vec<Vec3> = Vec::new();
    let triple = |words: &[&str], line: usize| -> Result<Vec3, StlError> {
        let vals: Vec<f64> = words
            .iter()
            .map(|w| w.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| StlError::Syntax { line, message: e.to_string() })?;
        match vals[..] {
            [x, y, z] => Ok(Vec3::new(x, y, z)),
            _ => Err(StlError::Syntax { line, message: "expected three numbers".into() }),
        }
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let words: Vec<&str> = raw.split_whitespace().collect();
        match words.as_slice() {
            ["facet", "normal", rest @ ..] => {
                normal = triple(rest, line)?;
                verts.clear();
            }
            ["vertex", rest @ ..] => verts.push(triple(rest, line)?),
            ["endfacet"] => {
                let tri: [Vec3; 3] = verts.as_slice().try_into().map_err(|_| StlError::Syntax {
                    line,
                    message: format!("facet has {} vertices", verts.len()),
                })?;
                facets.push((normal, tri));
            }
            [] | ["solid", ..] | ["endsolid", ..] | ["outer", "loop"] | ["endloop"] => {}
            _ => return Err(StlError::Syntax { line, message: format!("unexpected `{}`", raw.trim()) }),
        }
    }
    Ok(facets)
}

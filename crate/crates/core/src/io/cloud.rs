//! Point clouds from `.xyz` text or `.ply` (ASCII or binary little-endian).
//! Points are held in centimetres whatever the file unit.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("ply header: {0}")]
    Header(String),
    #[error("ply vertex {index}: {message}")]
    Vertex { index: usize, message: String },
    #[error("point cloud is empty")]
    Empty,
    #[error("unknown point-cloud format `{0}` (xyz|ply)")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    Ply,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Result<Self, CloudError> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        ext.parse()
    }
}

impl std::str::FromStr for CloudFormat {
    type Err = CloudError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xyz" | "txt" => Ok(CloudFormat::Xyz),
            "ply" => Ok(CloudFormat::Ply),
            other => Err(CloudError::Format(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LengthUnit {
    #[default]
    M,
    Cm,
}

impl LengthUnit {
    pub fn to_cm(self) -> f64 {
        match self {
            LengthUnit::M => 100.0,
            LengthUnit::Cm => 1.0,
        }
    }
}

impl std::str::FromStr for LengthUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "m" => Ok(LengthUnit::M),
            "cm" => Ok(LengthUnit::Cm),
            other => Err(format!("unknown unit `{other}` (m|cm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    /// Centimetres.
    pub points: Vec<Vec3>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, colors: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest absolute coordinate (cm), used to spot unit mix-ups.
    pub fn extent(&self) -> f64 {
        self.points.iter().map(|p| p.amax()).fold(0.0, f64::max)
    }
}

pub fn read_point_cloud(bytes: &[u8], format: CloudFormat, unit: LengthUnit) -> Result<PointCloud, CloudError> {
    let mut cloud = match format {
        CloudFormat::Xyz => read_xyz(bytes)?,
        CloudFormat::Ply => read_ply(bytes)?,
    };
    if cloud.is_empty() {
        return Err(CloudError::Empty);
    }
    let scale = unit.to_cm();
    if scale != 1.0 {
        cloud.points.iter_mut().for_each(|p| *p *= scale);
    }
    Ok(cloud)
}

fn finite(x: f64, what: impl FnOnce() -> CloudError) -> Result<f64, CloudError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(what())
    }
}

fn read_xyz(bytes: &[u8]) -> Result<PointCloud, CloudError> {
    let text = String::from_utf8_lossy(bytes);
    let mut points = Vec::new();
    let mut colors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("//") {
            continue;
        }
        let fields: Vec<&str> = t.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        if fields.len() < 3 {
            return Err(CloudError::Line { line, message: format!("expected x y z, found `{t}`") });
        }
        let mut xyz = [0.0; 3];
        for (k, f) in fields[..3].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| CloudError::Line { line, message: format!("`{f}` is not a number") })?;
            xyz[k] = finite(v, || CloudError::Line { line, message: format!("`{f}` is not finite") })?;
        }
        points.push(Vec3::from(xyz));
        if fields.len() >= 6 {
            let mut rgb = [0u8; 3];
            for (k, f) in fields[3..6].iter().enumerate() {
                let v: f64 = f
                    .parse()
                    .map_err(|_| CloudError::Line { line, message: format!("`{f}` is not a colour value") })?;
                rgb[k] = v.clamp(0.0, 255.0) as u8;
            }
            colors.push(rgb);
        }
    }
    let colors = (!colors.is_empty() && colors.len() == points.len()).then_some(colors);
    Ok(PointCloud { points, colors })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

fn read_ply(bytes: &[u8]) -> Result<PointCloud, CloudError> {
    let header_end = bytes
        .windows(10)
        .position(|w| w == b"end_header")
        .ok_or_else(|| CloudError::Header("missing end_header".into()))?;
    let mut body = header_end + 10;
    while body < bytes.len() && bytes[body] != b'\n' {
        body += 1;
    }
    body += 1;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|e| CloudError::Header(e.to_string()))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(CloudError::Header("missing `ply` magic".into()));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let w: Vec<&str> = line.split_whitespace().collect();
        match w.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, _] => return Err(CloudError::Header(format!("unsupported format `{other}`"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| CloudError::Header(format!("bad element count `{count}`")))?,
                properties: Vec::new(),
            }),
            ["property", "list", c, i, _] => {
                let (count, item) = Scalar::parse(c)
                    .zip(Scalar::parse(i))
                    .ok_or_else(|| CloudError::Header(format!("bad list property `{line}`")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| CloudError::Header("property before element".into()))?
                    .properties
                    .push(Property::List { count, item });
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| CloudError::Header(format!("unknown type `{ty}`")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| CloudError::Header("property before element".into()))?
                    .properties
                    .push(Property::Scalar(name.to_string(), ty));
            }
            [] | ["comment", ..] | ["obj_info", ..] => {}
            _ => return Err(CloudError::Header(format!("unexpected `{line}`"))),
        }
    }
    let binary = binary.ok_or_else(|| CloudError::Header("missing format line".into()))?;
    let vertex_at = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| CloudError::Header("no vertex element".into()))?;
    let vertex = &elements[vertex_at];
    let column = |name: &str| {
        vertex.properties.iter().position(|p| matches!(p, Property::Scalar(n, _) if n == name))
    };
    let [x, y, z] = ["x", "y", "z"].map(column);
    let (x, y, z) = match (x, y, z) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(CloudError::Header("vertex element needs x, y and z".into())),
    };
    let rgb = match ["red", "green", "blue"].map(column) {
        [Some(r), Some(g), Some(b)] => Some([r, g, b]),
        _ => None,
    };

    let mut points = Vec::with_capacity(vertex.count);
    let mut colors = rgb.map(|_| Vec::with_capacity(vertex.count));
    let mut push = |index: usize, values: &[f64]| -> Result<(), CloudError> {
        let p = Vec3::new(values[x], values[y], values[z]);
        if !p.iter().all(|c| c.is_finite()) {
            return Err(CloudError::Vertex { index, message: "non-finite coordinate".into() });
        }
        points.push(p);
        if let (Some(cols), Some(c)) = (colors.as_mut(), rgb) {
            cols.push(c.map(|k| values[k].clamp(0.0, 255.0) as u8));
        }
        Ok(())
    };

    if binary {
        let mut at = body;
        let truncated = |index| CloudError::Vertex { index, message: "unexpected end of data".into() };
        for (e_idx, element) in elements.iter().enumerate().take(vertex_at + 1) {
            for index in 0..element.count {
                let mut values = Vec::with_capacity(element.properties.len());
                for prop in &element.properties {
                    match prop {
                        Property::Scalar(_, ty) => {
                            let b = bytes.get(at..at + ty.size()).ok_or_else(|| truncated(index))?;
                            values.push(ty.read_le(b));
                            at += ty.size();
                        }
                        Property::List { count, item } => {
                            let b = bytes.get(at..at + count.size()).ok_or_else(|| truncated(index))?;
                            at += count.size() + count.read_le(b) as usize * item.size();
                            values.push(f64::NAN);
                        }
                    }
                }
                if e_idx == vertex_at {
                    push(index, &values)?;
                }
            }
        }
    } else {
        let text = String::from_utf8_lossy(&bytes[body.min(bytes.len())..]);
        let header_lines = header.lines().count() + 1;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        for (e_idx, element) in elements.iter().enumerate().take(vertex_at + 1) {
            for index in 0..element.count {
                let (i, line) = lines.next().ok_or(CloudError::Vertex {
                    index,
                    message: format!("file ends before {} {} records", element.count, element.name),
                })?;
                if e_idx != vertex_at {
                    continue;
                }
                let line_no = header_lines + i + 1;
                let values = line
                    .split_whitespace()
                    .map(|w| {
                        w.parse::<f64>()
                            .map_err(|_| CloudError::Line { line: line_no, message: format!("`{w}` is not a number") })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if values.len() < vertex.properties.len() {
                    return Err(CloudError::Line {
                        line: line_no,
                        message: format!("{} values for {} properties", values.len(), vertex.properties.len()),
                    });
                }
                push(index, &values).map_err(|_| CloudError::Line {
                    line: line_no,
                    message: "non-finite coordinate".into(),
                })?;
            }
        }
    }
    Ok(PointCloud { points, colors })
}

/// `x y z` per line in `unit`, shortest round-trip decimals.
pub fn write_xyz(cloud: &PointCloud, unit: LengthUnit) -> String {
    let s = 1.0 / unit.to_cm();
    let mut out = String::with_capacity(cloud.len() * 40);
    for p in &cloud.points {
        let _ = writeln!(out, "{} {} {}", p.x * s, p.y * s, p.z * s);
    }
    out
}

/// PLY with `double` coordinates in `unit`.
pub fn write_ply(cloud: &PointCloud, unit: LengthUnit, binary: bool) -> Vec<u8> {
    let s = 1.0 / unit.to_cm();
    let format = if binary { "binary_little_endian" } else { "ascii" };
    let mut out = format!(
        "ply\nformat {format} 1.0\ncomment units {}\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        match unit {
            LengthUnit::M => "m",
            LengthUnit::Cm => "cm",
        },
        cloud.len()
    )
    .into_bytes();
    for p in &cloud.points {
        if binary {
            for c in p.iter() {
                out.extend_from_slice(&(c * s).to_le_bytes());
            }
        } else {
            out.extend_from_slice(format!("{} {} {}\n", p.x * s, p.y * s, p.z * s).as_bytes());
        }
    }
    out
}

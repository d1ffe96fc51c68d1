//! Rotations, turtle-style centerline integration, parallel-transport frames,
//! circular sweeps and branch attachment frames.

use nalgebra::Matrix3;
use thiserror::Error;

use crate::spline::{BSplineSurface, SplineError};
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("rotation axis has norm {0}, expected unit length")]
    NonUnitAxis(f64),
    #[error("invalid centerline: {0}")]
    InvalidCenterline(String),
    #[error("invalid curvature term: {0}")]
    InvalidTerm(String),
    #[error("height {z} cm outside centerline extent [{lo}, {hi}]")]
    HeightOutOfRange { z: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Rodrigues rotation matrix for a unit `axis`, in expanded form.
pub fn rotation_matrix(axis: &Vec3, theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    let cc = 1.0 - c;
    let (x, y, z) = (axis.x, axis.y, axis.z);
    Matrix3::new(
        x * x * cc + c,
        x * y * cc - z * s,
        x * z * cc + y * s,
        y * x * cc + z * s,
        y * y * cc + c,
        y * z * cc - x * s,
        z * x * cc - y * s,
        z * y * cc + x * s,
        z * z * cc + c,
    )
}

/// Rotate `x` by `theta` radians about `axis`.
///
/// Axes within 1e-6 of unit length are renormalised; anything further off is
/// rejected.
pub fn rotate_about_axis(axis: &Vec3, theta: f64, x: &Vec3) -> Result<Vec3, FrameError> {
    let axis = checked_unit(axis)?;
    Ok(rotation_matrix(&axis, theta) * x)
}

fn checked_unit(axis: &Vec3) -> Result<Vec3, FrameError> {
    let norm = axis.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
        return Err(FrameError::NonUnitAxis(norm));
    }
    if (norm - 1.0).abs() <= 1e-9 {
        Ok(*axis)
    } else {
        Ok(axis / norm)
    }
}

/// Bending-plane axis in the global xy-plane: 0° maps to +y, 90° to -x.
pub fn azimuth_axis(phi_deg: f64) -> Vec3 {
    let (s, c) = phi_deg.to_radians().sin_cos();
    Vec3::new(-s, c, 0.0)
}

/// Orthonormal right-handed frame: tangent, normal, binormal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub t: Vec3,
    pub n: Vec3,
    pub b: Vec3,
}

impl Frame {
    /// Frame from a tangent and a normal hint; the hint is projected off the
    /// tangent and renormalised.
    pub fn from_tangent_normal(t: Vec3, normal_hint: Vec3) -> Result<Self, FrameError> {
        let t_len = t.norm();
        if !(t_len > 0.0) {
            return Err(FrameError::InvalidCenterline("zero tangent".into()));
        }
        let t = t / t_len;
        let n = normal_hint - t * normal_hint.dot(&t);
        let n_len = n.norm();
        if !(n_len > 1e-12) {
            return Err(FrameError::InvalidCenterline(
                "initial normal is parallel to the tangent".into(),
            ));
        }
        let n = n / n_len;
        Ok(Self { t, n, b: t.cross(&n) })
    }

    pub fn rotated(&self, axis: &Vec3, theta: f64) -> Self {
        let r = rotation_matrix(axis, theta);
        Self { t: r * self.t, n: r * self.n, b: r * self.b }
    }

    /// Map local coordinates `(along T, along N, along B)` to a direction.
    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        self.t * local.x + self.n * local.y + self.b * local.z
    }
}

/// Curvature term `(kappa, axis, [s0, s1])` active over a fraction of a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaTerm {
    kappa: f64,
    axis: Vec3,
    span: (f64, f64),
}

impl KappaTerm {
    pub fn new(kappa: f64, axis: Vec3, span: (f64, f64)) -> Result<Self, FrameError> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(FrameError::InvalidTerm(format!("kappa {kappa} must be finite and >= 0")));
        }
        let (s0, s1) = span;
        if !(0.0 <= s0 && s0 <= s1 && s1 <= 1.0) {
            return Err(FrameError::InvalidTerm(format!("span [{s0}, {s1}] not within [0, 1]")));
        }
        // descriptor axes may be given unnormalised
        let norm = axis.norm();
        if !(norm > 1e-12) || !norm.is_finite() {
            return Err(FrameError::NonUnitAxis(norm));
        }
        Ok(Self { kappa, axis: axis / norm, span })
    }

    /// Term bending in the global plane selected by `azimuth_deg`.
    pub fn from_azimuth(kappa: f64, azimuth_deg: f64, span: (f64, f64)) -> Result<Self, FrameError> {
        Self::new(kappa, azimuth_axis(azimuth_deg), span)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    /// Inclusive on both ends.
    pub fn is_active(&self, s: f64) -> bool {
        self.span.0 <= s && s <= self.span.1
    }
}

/// Points produced by [`integrate_centerline`] plus the tangent after the last step.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedPath {
    pub points: Vec<Vec3>,
    pub end_tangent: Vec3,
}

/// Explicit turtle integration: at step `k` (fraction `k / n_seg`) every active
/// term rotates the tangent in list order, then the point advances by `t * ds`.
pub fn integrate_centerline(
    origin: Vec3,
    initial_tangent: Vec3,
    length: f64,
    n_seg: usize,
    terms: &[KappaTerm],
) -> Result<IntegratedPath, FrameError> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(FrameError::InvalidCenterline(format!("length {length} must be > 0")));
    }
    if n_seg == 0 {
        return Err(FrameError::InvalidCenterline("n_seg must be >= 1".into()));
    }
    let mut t = checked_unit(&initial_tangent)?;
    let ds = length / n_seg as f64;
    let rotations: Vec<Matrix3<f64>> =
        terms.iter().map(|term| rotation_matrix(&term.axis, term.kappa * ds)).collect();

    let mut points = Vec::with_capacity(n_seg + 1);
    let mut p = origin;
    points.push(p);
    for k in 0..n_seg {
        let s = k as f64 / n_seg as f64;
        for (term, r) in terms.iter().zip(&rotations) {
            if term.is_active(s) {
                t = r * t;
            }
        }
        p += t * ds;
        points.push(p);
    }
    Ok(IntegratedPath { points, end_tangent: t })
}

/// Minimal rotation of `n` carrying tangent `from` onto `to`.
fn transport_vector(n: &Vec3, from: &Vec3, to: &Vec3) -> Vec3 {
    let axis = from.cross(to);
    let len = axis.norm();
    if len < 1e-10 {
        return *n;
    }
    let angle = from.dot(to).clamp(-1.0, 1.0).acos();
    rotation_matrix(&(axis / len), angle) * n
}

fn polyline_tangents(points: &[Vec3]) -> Result<Vec<Vec3>, FrameError> {
    if points.len() < 2 {
        return Err(FrameError::InvalidCenterline(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(k) = points.windows(2).position(|w| (w[1] - w[0]).norm() == 0.0) {
        return Err(FrameError::InvalidCenterline(format!(
            "points {k} and {} coincide",
            k + 1
        )));
    }
    let last = points.len() - 1;
    Ok((0..=last)
        .map(|i| {
            let d = match i {
                0 => points[1] - points[0],
                i if i == last => points[last] - points[last - 1],
                i => {
                    let d = points[i + 1] - points[i - 1];
                    if d.norm() > 0.0 {
                        d
                    } else {
                        points[i + 1] - points[i]
                    }
                }
            };
            d.normalize()
        })
        .collect())
}

/// Twist-minimising frames along a polyline. The first normal is
/// `initial_normal` made orthogonal to the first tangent.
pub fn parallel_transport(points: &[Vec3], initial_normal: &Vec3) -> Result<Vec<Frame>, FrameError> {
    let tangents = polyline_tangents(points)?;
    let mut frames = Vec::with_capacity(points.len());
    frames.push(Frame::from_tangent_normal(tangents[0], *initial_normal)?);
    for i in 1..tangents.len() {
        let prev = frames[i - 1];
        let t = tangents[i];
        let n = transport_vector(&prev.n, &prev.t, &t);
        let n = n - t * n.dot(&t);
        let n = n / n.norm();
        frames.push(Frame { t, n, b: t.cross(&n) });
    }
    Ok(frames)
}

/// Polyline with per-vertex radius, transported frame and arclength.
#[derive(Debug, Clone, PartialEq)]
pub struct FramedCenterline {
    points: Vec<Vec3>,
    radii: Vec<f64>,
    frames: Vec<Frame>,
    arclength: Vec<f64>,
}

impl FramedCenterline {
    pub fn new(points: Vec<Vec3>, radii: Vec<f64>, initial_normal: &Vec3) -> Result<Self, FrameError> {
        if radii.len() != points.len() {
            return Err(FrameError::InvalidCenterline(format!(
                "{} radii for {} points",
                radii.len(),
                points.len()
            )));
        }
        if let Some(k) = radii.iter().position(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(FrameError::InvalidCenterline(format!(
                "radius {} at vertex {k} must be > 0",
                radii[k]
            )));
        }
        let frames = parallel_transport(&points, initial_normal)?;
        let mut arclength = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        arclength.push(acc);
        for w in points.windows(2) {
            acc += (w[1] - w[0]).norm();
            arclength.push(acc);
        }
        Ok(Self { points, radii, frames, arclength })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn arclength(&self) -> &[f64] {
        &self.arclength
    }

    pub fn length(&self) -> f64 {
        *self.arclength.last().expect("non-empty centerline")
    }

    /// Segment index and local parameter at arclength fraction `s`.
    fn locate_fraction(&self, s: f64) -> (usize, f64) {
        let target = s.clamp(0.0, 1.0) * self.length();
        let last = self.points.len() - 1;
        let k = self.arclength.partition_point(|&a| a <= target).clamp(1, last) - 1;
        let seg = self.arclength[k + 1] - self.arclength[k];
        (k, ((target - self.arclength[k]) / seg).clamp(0.0, 1.0))
    }

    /// Point, radius and transported frame at arclength fraction `s` in [0, 1].
    pub fn sample(&self, s: f64) -> (Vec3, f64, Frame) {
        let (k, w) = self.locate_fraction(s);
        self.interpolate(k, w)
    }

    fn interpolate(&self, k: usize, w: f64) -> (Vec3, f64, Frame) {
        let p = self.points[k] * (1.0 - w) + self.points[k + 1] * w;
        let r = self.radii[k] * (1.0 - w) + self.radii[k + 1] * w;
        let f0 = self.frames[k];
        let t = f0.t * (1.0 - w) + self.frames[k + 1].t * w;
        let t = if t.norm() > 1e-12 { t.normalize() } else { f0.t };
        let n = transport_vector(&f0.n, &f0.t, &t);
        let n = (n - t * n.dot(&t)).normalize();
        (p, r, Frame { t, n, b: t.cross(&n) })
    }

    /// Arclength fraction of the first point whose height reaches `z`.
    pub fn fraction_at_height(&self, z: f64) -> Result<f64, FrameError> {
        let lo = self.points[0].z;
        let hi = self.points.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
        if !(lo..=hi).contains(&z) {
            return Err(FrameError::HeightOutOfRange { z, lo, hi });
        }
        for k in 0..self.points.len() - 1 {
            let (za, zb) = (self.points[k].z, self.points[k + 1].z);
            if za <= z && z <= zb && zb > za {
                let w = (z - za) / (zb - za);
                let a = self.arclength[k] + w * (self.arclength[k + 1] - self.arclength[k]);
                return Ok(a / self.length());
            }
            if za == z {
                return Ok(self.arclength[k] / self.length());
            }
        }
        Ok(1.0)
    }

    /// Axis point, radius and frame at height `z`.
    pub fn sample_height(&self, z: f64) -> Result<(Vec3, f64, Frame), FrameError> {
        Ok(self.sample(self.fraction_at_height(z)?))
    }
}

/// Closed circular sweep: `ring_samples + 1` rows around the centerline (the
/// last duplicating the first) by one column per centerline vertex.
/// Degrees are 2 around and `min(3, M)` along.
pub fn sweep_surface(
    centerline: &FramedCenterline,
    ring_samples: usize,
    name: &str,
) -> Result<BSplineSurface, FrameError> {
    if ring_samples < 4 {
        return Err(FrameError::InvalidCenterline(format!(
            "ring_samples {ring_samples} must be >= 4"
        )));
    }
    let m = centerline.points.len() - 1;
    let mut grid: Vec<Vec<Vec3>> = (0..ring_samples)
        .map(|u| {
            let theta = std::f64::consts::TAU * u as f64 / ring_samples as f64;
            let (s, c) = theta.sin_cos();
            centerline
                .points
                .iter()
                .zip(&centerline.radii)
                .zip(&centerline.frames)
                .map(|((p, r), f)| p + (f.n * c + f.b * s) * *r)
                .collect()
        })
        .collect();
    grid.push(grid[0].clone());
    Ok(BSplineSurface::clamped(name, 2, m.min(3), grid)?)
}

/// Branch base point and frame at arclength fraction `s`.
///
/// The transported frame is turned by `azimuth` about T, then pitched about the
/// rotated binormal (tilting T toward the azimuth direction), then rolled
/// about the pitched tangent.
pub fn attachment_frame(
    centerline: &FramedCenterline,
    s: f64,
    azimuth_deg: f64,
    pitch_deg: f64,
    roll_deg: f64,
) -> (Vec3, Frame) {
    let (p, _, frame) = centerline.sample(s);
    (p, orient_azimuth_pitch_roll(&frame, azimuth_deg, pitch_deg, roll_deg))
}

pub fn orient_azimuth_pitch_roll(frame: &Frame, azimuth_deg: f64, pitch_deg: f64, roll_deg: f64) -> Frame {
    let f = frame.rotated(&frame.t, azimuth_deg.to_radians());
    let f = f.rotated(&f.b, pitch_deg.to_radians());
    f.rotated(&f.t, roll_deg.to_radians())
}

/// Organ orientation at a branch tip: yaw about N (turning within the T-B
/// plane), pitch about the yawed binormal (tilting toward N), roll about the
/// resulting tangent.
pub fn orient_yaw_pitch_roll(frame: &Frame, yaw_deg: f64, pitch_deg: f64, roll_deg: f64) -> Frame {
    let f = frame.rotated(&frame.n, yaw_deg.to_radians());
    let f = f.rotated(&f.b, pitch_deg.to_radians());
    f.rotated(&f.t, roll_deg.to_radians())
}

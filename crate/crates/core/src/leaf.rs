//! Leaf and leaflet control grids.
//!
//! Grids are built in a local frame (x along the midrib, y across the blade,
//! z out of the upper surface) and deformed in a fixed order:
//! width, skew/bend, camber, twist, V-fold, hinges, then graft/blend.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{rotation_matrix, Frame, FrameError, FramedCenterline};
use crate::spline::{BSplineSurface, SplineError};
use crate::{Family, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeafError {
    #[error("invalid leaf grid: {0}")]
    InvalidGrid(String),
    #[error("invalid leaf parameter: {0}")]
    InvalidParams(String),
    #[error("invalid graft: {0}")]
    InvalidGraft(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Cubic ramp `x^2 (3 - 2x)`; callers clamp `x` to [0, 1].
pub fn smoothstep(x: f64) -> f64 {
    x * x * (3.0 - 2.0 * x)
}

/// Power-law taper from `w0` at the base to zero at the tip.
pub fn monocot_width(u: f64, w0: f64, taper_pow: f64) -> f64 {
    w0 * (1.0 - u.powf(taper_pow))
}

fn beta_shape(u: f64, alpha: f64, beta: f64) -> f64 {
    u.powf(alpha) * (1.0 - u).powf(beta)
}

/// Peak of `u^a (1-u)^b` over [0, 1].
fn beta_peak(alpha: f64, beta: f64) -> f64 {
    if alpha > 0.0 && beta > 0.0 {
        beta_shape(alpha / (alpha + beta), alpha, beta)
    } else {
        (0..=4096)
            .map(|k| beta_shape(k as f64 / 4096.0, alpha, beta))
            .fold(0.0, f64::max)
    }
}

/// Beta-profile width scaled to peak at `w_max`, with apex sharpening and base
/// rounding applied on the outer 20% and inner 15% of the length.
pub fn dicot_width(u: f64, w_max: f64, alpha: f64, beta: f64, apex: f64, base: f64) -> f64 {
    let profile = w_max * beta_shape(u, alpha, beta) / beta_peak(alpha, beta);
    let f_tip = ((u - 0.8) / 0.2).max(0.0);
    let f_base = ((0.15 - u) / 0.15).max(0.0);
    profile * (1.0 - 0.35 * apex * f_tip) * (1.0 + 0.20 * base * f_base)
}

/// Morphology of one blade. Angles are in radians, lengths in centimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafParams {
    pub length: f64,
    /// Base width for monocots, maximum width for dicots.
    pub width: f64,
    /// Monocot taper exponent.
    pub taper_pow: f64,
    pub alpha: f64,
    pub beta: f64,
    pub apex: f64,
    pub base: f64,
    pub skew: f64,
    pub bend: f64,
    pub camber: f64,
    pub camber_pow: f64,
    pub twist: f64,
    pub fold: f64,
    pub fold_pow: f64,
    pub fold_env: f64,
    /// Lateral midrib displacement at full width; scales with the local width.
    pub midrib_offset: f64,
    pub width_bias_left: f64,
    pub width_bias_right: f64,
}

impl Default for LeafParams {
    fn default() -> Self {
        Self {
            length: 60.0,
            width: 8.0,
            taper_pow: 1.2,
            alpha: 1.0,
            beta: 1.5,
            apex: 0.0,
            base: 0.0,
            skew: 0.0,
            bend: 0.0,
            camber: 0.0,
            camber_pow: 1.4,
            twist: 0.0,
            fold: 0.0,
            fold_pow: 1.0,
            fold_env: 1.0,
            midrib_offset: 0.0,
            width_bias_left: 1.0,
            width_bias_right: 1.0,
        }
    }
}

impl LeafParams {
    pub fn validate(&self, family: Family) -> Result<(), LeafError> {
        let positive = [
            ("length", self.length),
            ("width", self.width),
            ("camber_pow", self.camber_pow),
            ("width_bias_left", self.width_bias_left),
            ("width_bias_right", self.width_bias_right),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(LeafError::InvalidParams(format!("{name} = {value} must be > 0")));
            }
        }
        match family {
            Family::Monocot if !(self.taper_pow > 0.0) => {
                Err(LeafError::InvalidParams(format!("width_pow = {} must be > 0", self.taper_pow)))
            }
            Family::Dicot if !(self.alpha > 0.0 && self.beta > 0.0) => Err(LeafError::InvalidParams(
                format!("alpha = {}, beta = {} must both be > 0", self.alpha, self.beta),
            )),
            _ => Ok(()),
        }
    }

    pub fn width_at(&self, u: f64, family: Family) -> f64 {
        match family {
            Family::Monocot => monocot_width(u, self.width, self.taper_pow),
            Family::Dicot => dicot_width(u, self.width, self.alpha, self.beta, self.apex, self.base),
        }
    }

    /// Midrib curve including skew, bend, offset and the camber crest.
    fn midrib(&self, u: f64, family: Family) -> Vec3 {
        let s = (PI * u).sin();
        Vec3::new(
            self.length * u,
            self.skew * self.width * s + self.midrib_offset * self.width_at(u, family) / self.width,
            (self.bend + self.camber) * self.length * s,
        )
    }

    fn midrib_tangent(&self, u: f64, family: Family) -> Vec3 {
        let h = 1e-6;
        let (a, b) = ((u - h).max(0.0), (u + h).min(1.0));
        (self.midrib(b, family) - self.midrib(a, family)).normalize()
    }
}

/// Which local axis a hinge rotates about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum HingeAxis {
    T,
    N,
    #[default]
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HingeSpec {
    pub u0: f64,
    #[serde(rename = "angle-deg")]
    pub angle_deg: f64,
    #[serde(default)]
    pub axis: HingeAxis,
    /// Transition width in u.
    #[serde(default = "default_hinge_smooth")]
    pub smooth: f64,
}

fn default_hinge_smooth() -> f64 {
    0.02
}

impl HingeSpec {
    pub fn validate(&self) -> Result<(), LeafError> {
        if !(0.0..=1.0).contains(&self.u0) {
            return Err(LeafError::InvalidParams(format!("hinge u0 = {} outside [0, 1]", self.u0)));
        }
        if !(self.smooth > 0.0) {
            return Err(LeafError::InvalidParams(format!("hinge smooth = {} must be > 0", self.smooth)));
        }
        if !self.angle_deg.is_finite() {
            return Err(LeafError::InvalidParams("hinge angle is not finite".into()));
        }
        Ok(())
    }
}

/// `rows x columns` control points with their normalised coordinates:
/// `u` in [0, 1] along the blade, `v` in [-1, 1] across it.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafGrid {
    pub points: Vec<Vec<Vec3>>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl LeafGrid {
    pub fn rows(&self) -> usize {
        self.points.len()
    }

    pub fn columns(&self) -> usize {
        self.v.len()
    }

    pub fn midrib_column(&self) -> usize {
        self.v.len() / 2
    }

    /// Map local coordinates into a frame: x along T, y along B, z along -N.
    pub fn placed(&self, origin: &Vec3, frame: &Frame) -> LeafGrid {
        let points = self
            .points
            .iter()
            .map(|row| row.iter().map(|p| origin + frame.t * p.x + frame.b * p.y - frame.n * p.z).collect())
            .collect();
        LeafGrid { points, ..self.clone() }
    }

    /// Cubic along the blade, `min(3, columns - 1)` across.
    pub fn to_surface(&self, name: &str) -> Result<BSplineSurface, LeafError> {
        Ok(BSplineSurface::clamped(
            name,
            3.min(self.rows() - 1),
            3.min(self.columns() - 1),
            self.points.clone(),
        )?)
    }

    /// Frame at row `i`: T along the midrib column, B across the blade toward
    /// +v, N = B x T (the underside for an unrolled blade).
    pub fn row_frame(&self, i: usize) -> Frame {
        let mid = self.midrib_column();
        let last = self.rows() - 1;
        let (a, b) = match i {
            0 => (0, 1),
            i if i == last => (last - 1, last),
            i => (i - 1, i + 1),
        };
        let mut t = self.points[b][mid] - self.points[a][mid];
        if t.norm() < 1e-12 {
            t = self.points[last][mid] - self.points[0][mid];
        }
        let t = t.normalize();
        let row = &self.points[i];
        let across = row[row.len() - 1] - row[0];
        let mut b_vec = across - t * across.dot(&t);
        if b_vec.norm() < 1e-12 {
            // collapsed row (leaf tip): borrow the nearest row with width
            b_vec = (0..self.rows())
                .map(|k| {
                    let r = &self.points[k];
                    let a = r[r.len() - 1] - r[0];
                    (k.abs_diff(i), a - t * a.dot(&t))
                })
                .filter(|(_, v)| v.norm() >= 1e-12)
                .min_by_key(|(d, _)| *d)
                .map(|(_, v)| v)
                .unwrap_or_else(|| {
                    let y = Vec3::y();
                    let y = y - t * y.dot(&t);
                    if y.norm() > 1e-12 { y } else { Vec3::z().cross(&t) }
                });
        }
        let b = b_vec.normalize();
        Frame { t, n: b.cross(&t), b }
    }
}

/// Local control grid with every non-hinge deformation applied.
pub fn build_leaf_grid(
    params: &LeafParams,
    rows: usize,
    columns: usize,
    family: Family,
) -> Result<LeafGrid, LeafError> {
    if rows < 4 {
        return Err(LeafError::InvalidGrid(format!("ctrl_u = {rows} must be >= 4")));
    }
    if columns < 3 || columns.is_multiple_of(2) {
        return Err(LeafError::InvalidGrid(format!(
            "ctrl_v = {columns} must be odd and >= 3 so a midrib column exists"
        )));
    }
    params.validate(family)?;

    let u: Vec<f64> = (0..rows).map(|i| i as f64 / (rows - 1) as f64).collect();
    let v: Vec<f64> = (0..columns)
        .map(|j| {
            if 2 * j + 1 == columns {
                0.0
            } else {
                2.0 * j as f64 / (columns - 1) as f64 - 1.0
            }
        })
        .collect();

    let points = u
        .iter()
        .map(|&ui| {
            let width = params.width_at(ui, family);
            let s = (PI * ui).sin();
            let y_skew = params.skew * params.width * s;
            let z_bend = params.bend * params.length * s;
            let offset = params.midrib_offset * width / params.width;

            let flat: Vec<Vec3> = v
                .iter()
                .map(|&vj| {
                    let bias = if vj < 0.0 { params.width_bias_left } else { params.width_bias_right };
                    let y = y_skew + vj * 0.5 * width * bias + offset * (1.0 - vj.abs());
                    let camber =
                        params.camber * params.length * (1.0 - vj.abs()).powf(params.camber_pow) * s;
                    Vec3::new(params.length * ui, y, z_bend + camber)
                })
                .collect();

            let pivot = flat[columns / 2];
            let tangent = params.midrib_tangent(ui, family);
            let twist = params.twist * ui;
            let envelope = s.max(0.0).powf(params.fold_env);
            flat.iter()
                .zip(&v)
                .map(|(p, &vj)| {
                    let fold = params.fold * vj.signum() * vj.abs().powf(params.fold_pow) * envelope;
                    let fold = if vj == 0.0 { 0.0 } else { fold };
                    let angle = twist + fold;
                    if angle == 0.0 {
                        *p
                    } else {
                        pivot + rotation_matrix(&tangent, angle) * (p - pivot)
                    }
                })
                .collect()
        })
        .collect();

    Ok(LeafGrid { points, u, v })
}

/// Bend rows distal to each hinge about per-column pivots on the hinge row,
/// hinges applied in list order.
pub fn apply_hinges(grid: &LeafGrid, hinges: &[HingeSpec]) -> Result<LeafGrid, LeafError> {
    let mut out = grid.clone();
    for hinge in hinges {
        hinge.validate()?;
        if hinge.u0 >= 1.0 || hinge.angle_deg == 0.0 {
            continue;
        }
        let i0 = nearest_row(&out.u, hinge.u0);
        let frame = out.row_frame(i0);
        let axis = match hinge.axis {
            HingeAxis::T => frame.t,
            HingeAxis::N => frame.n,
            HingeAxis::B => frame.b,
        };
        let theta = hinge.angle_deg.to_radians();
        let pivots = out.points[i0].clone();
        for i in 0..out.rows() {
            let ui = out.u[i];
            if ui < hinge.u0 {
                continue;
            }
            let w = smoothstep(((ui - hinge.u0) / hinge.smooth).clamp(0.0, 1.0));
            let r = rotation_matrix(&axis, w * theta);
            for (p, pivot) in out.points[i].iter_mut().zip(&pivots) {
                *p = pivot + r * (*p - pivot);
            }
        }
    }
    Ok(out)
}

fn nearest_row(u: &[f64], u0: f64) -> usize {
    u.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - u0).abs().total_cmp(&(b.1 - u0).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Where and how a blade base wraps onto the culm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraftSpec {
    /// Height of the lowest graft row (cm).
    pub z_node: f64,
    pub rows: usize,
    /// Height span covered by the graft rows (cm).
    pub dz: f64,
    /// Arc centre, measured from the culm normal toward its binormal.
    pub azimuth_deg: f64,
    pub arc_span_deg: f64,
    /// Radial clearance above the culm surface (cm).
    pub radial_offset: f64,
}

impl GraftSpec {
    pub fn row_height(&self, g: usize) -> f64 {
        self.z_node + g as f64 * self.dz / (self.rows - 1) as f64
    }

    fn arc_angle(&self, j: usize, columns: usize) -> f64 {
        let phi = self.azimuth_deg
            + (2.0 * j as f64 / (columns - 1) as f64 - 1.0) * self.arc_span_deg / 2.0;
        phi.to_radians()
    }

    /// Culm ring sample for column `j` at height `z`.
    pub fn ring_point(
        &self,
        culm: &FramedCenterline,
        z: f64,
        j: usize,
        columns: usize,
    ) -> Result<Vec3, LeafError> {
        let (p, r, f) = culm.sample_height(z)?;
        let (s, c) = self.arc_angle(j, columns).sin_cos();
        Ok(p + (f.n * c + f.b * s) * (r + self.radial_offset))
    }
}

/// Replace the first `graft.rows` rows with arcs sampled on the culm surface.
pub fn hard_graft(
    grid: &LeafGrid,
    culm: &FramedCenterline,
    graft: &GraftSpec,
) -> Result<LeafGrid, LeafError> {
    if graft.rows < 2 {
        return Err(LeafError::InvalidGraft(format!(
            "graft rows = {} must be >= 2 (row spacing divides by rows - 1)",
            graft.rows
        )));
    }
    if graft.rows >= grid.rows() {
        return Err(LeafError::InvalidGraft(format!(
            "graft rows = {} must be fewer than ctrl_u = {}",
            graft.rows,
            grid.rows()
        )));
    }
    let mut out = grid.clone();
    let columns = grid.columns();
    for g in 0..graft.rows {
        let z = graft.row_height(g);
        for j in 0..columns {
            out.points[g][j] = graft.ring_point(culm, z, j, columns)?;
        }
    }
    Ok(out)
}

/// Blend rows `graft_rows..` with `u < u_attach` toward the culm ring rows,
/// weight `1 - smoothstep(u / u_attach)` on the ring.
pub fn soft_blend(
    grid: &LeafGrid,
    u_attach: f64,
    graft_rows: usize,
    ring_rows: &[Vec<Vec3>],
) -> Result<LeafGrid, LeafError> {
    if !(u_attach > 0.0 && u_attach <= 1.0) {
        return Err(LeafError::InvalidGraft(format!("u_attach = {u_attach} must be in (0, 1]")));
    }
    if ring_rows.len() != grid.rows() || ring_rows.iter().any(|r| r.len() != grid.columns()) {
        return Err(LeafError::InvalidGraft("culm ring rows do not match the leaf grid".into()));
    }
    let mut out = grid.clone();
    for i in graft_rows..grid.rows() {
        let ui = grid.u[i];
        if ui >= u_attach {
            continue;
        }
        let alpha = 1.0 - smoothstep(ui / u_attach);
        for (p, ring) in out.points[i].iter_mut().zip(&ring_rows[i]) {
            *p = *p * (1.0 - alpha) + ring * alpha;
        }
    }
    Ok(out)
}

//! Non-rational B-spline basis, curves, tensor-product surfaces and
//! uniform tessellation into triangle meshes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("parameter {u} outside domain [{lo}, {hi}]")]
    Domain { u: f64, lo: f64, hi: f64 },
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
    #[error("invalid control grid: {0}")]
    InvalidGrid(String),
    #[error("invalid sampling: {0}")]
    InvalidSampling(String),
}

/// Non-decreasing knot sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>) -> Result<Self, SplineError> {
        if knots.len() < 2 {
            return Err(SplineError::InvalidKnots(format!(
                "need at least 2 knots, got {}",
                knots.len()
            )));
        }
        if let Some(k) = knots.iter().position(|k| !k.is_finite()) {
            return Err(SplineError::InvalidKnots(format!("knot {k} is not finite")));
        }
        if let Some(k) = knots.windows(2).position(|w| w[1] < w[0]) {
            return Err(SplineError::InvalidKnots(format!(
                "knots decrease at index {}: {} > {}",
                k + 1,
                knots[k],
                knots[k + 1]
            )));
        }
        Ok(Self { knots })
    }

    /// Clamped uniform knots on [0, 1] for `n_ctrl` control points of degree `degree`.
    pub fn clamped_uniform(n_ctrl: usize, degree: usize) -> Result<Self, SplineError> {
        if n_ctrl <= degree {
            return Err(SplineError::InvalidKnots(format!(
                "{n_ctrl} control points cannot carry degree {degree}"
            )));
        }
        let interior = n_ctrl - degree - 1;
        let mut knots = Vec::with_capacity(n_ctrl + degree + 1);
        knots.extend(std::iter::repeat_n(0.0, degree + 1));
        for k in 1..=interior {
            knots.push(k as f64 / (interior + 1) as f64);
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Ok(Self { knots })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Number of control points this vector supports at `degree`.
    pub fn control_count(&self, degree: usize) -> Option<usize> {
        self.knots.len().checked_sub(degree + 1).filter(|&n| n > 0)
    }

    /// Valid parameter interval `[u_p, u_{n+1}]`.
    pub fn domain(&self, degree: usize) -> Result<(f64, f64), SplineError> {
        let n_ctrl = self.control_count(degree).ok_or_else(|| {
            SplineError::InvalidKnots(format!(
                "{} knots cannot carry degree {degree}",
                self.knots.len()
            ))
        })?;
        let lo = self.knots[degree];
        let hi = self.knots[n_ctrl];
        if hi <= lo {
            return Err(SplineError::InvalidKnots(format!(
                "empty parameter domain [{lo}, {hi}]"
            )));
        }
        Ok((lo, hi))
    }

    /// Index `s` with `knots[s] <= u < knots[s+1]`; the last non-empty span is
    /// closed on the right so the domain end is evaluable.
    fn find_span(&self, degree: usize, u: f64) -> Result<usize, SplineError> {
        let (lo, hi) = self.domain(degree)?;
        if !(lo..=hi).contains(&u) {
            return Err(SplineError::Domain { u, lo, hi });
        }
        let n_ctrl = self.knots.len() - degree - 1;
        if u >= hi {
            // last span with positive length ending at `hi`
            let mut s = n_ctrl - 1;
            while self.knots[s] >= self.knots[s + 1] {
                s -= 1;
            }
            return Ok(s);
        }
        // upper bound over the active region
        let idx = self.knots[degree..=n_ctrl].partition_point(|&k| k <= u) + degree;
        Ok(idx - 1)
    }
}

/// The `p + 1` basis functions that may be nonzero at `u`, as `(index, value)`.
///
/// Cox-de Boor recursion evaluated bottom-up over the triangular table; any
/// `0/0` term (repeated knots) contributes zero.
pub fn basis_functions(
    knots: &KnotVector,
    degree: usize,
    u: f64,
) -> Result<Vec<(usize, f64)>, SplineError> {
    let span = knots.find_span(degree, u)?;
    let values = basis_at_span(knots.as_slice(), degree, span, u);
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(k, n)| (span - degree + k, n))
        .collect())
}

fn basis_at_span(knots: &[f64], degree: usize, span: usize, u: f64) -> Vec<f64> {
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

#[derive(Debug, Clone, PartialEq)]
pub struct BSplineCurve {
    degree: usize,
    knots: KnotVector,
    control_points: Vec<Vec3>,
}

impl BSplineCurve {
    pub fn new(
        degree: usize,
        knots: KnotVector,
        control_points: Vec<Vec3>,
    ) -> Result<Self, SplineError> {
        if degree == 0 {
            return Err(SplineError::InvalidGrid("curve degree must be >= 1".into()));
        }
        match knots.control_count(degree) {
            Some(n) if n == control_points.len() => {}
            _ => {
                return Err(SplineError::InvalidGrid(format!(
                    "{} control points do not match {} knots at degree {degree}",
                    control_points.len(),
                    knots.len()
                )))
            }
        }
        knots.domain(degree)?;
        Ok(Self { degree, knots, control_points })
    }

    /// Clamped uniform curve through the end control points.
    pub fn clamped(degree: usize, control_points: Vec<Vec3>) -> Result<Self, SplineError> {
        let knots = KnotVector::clamped_uniform(control_points.len(), degree)?;
        Self::new(degree, knots, control_points)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn control_points(&self) -> &[Vec3] {
        &self.control_points
    }

    pub fn evaluate(&self, u: f64) -> Result<Vec3, SplineError> {
        Ok(basis_functions(&self.knots, self.degree, u)?
            .into_iter()
            .fold(Vec3::zeros(), |acc, (i, n)| acc + self.control_points[i] * n))
    }
}

/// Tensor-product B-spline surface with unit weights.
///
/// The control grid is stored row-major: `count_u` rows along `u`, each with
/// `count_v` points along `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineSurface {
    name: String,
    degree_u: usize,
    degree_v: usize,
    knots_u: KnotVector,
    knots_v: KnotVector,
    count_u: usize,
    count_v: usize,
    control: Vec<Vec3>,
}

impl BSplineSurface {
    pub fn new(
        name: impl Into<String>,
        degree_u: usize,
        degree_v: usize,
        knots_u: KnotVector,
        knots_v: KnotVector,
        grid: Vec<Vec<Vec3>>,
    ) -> Result<Self, SplineError> {
        let count_u = grid.len();
        let count_v = grid.first().map_or(0, Vec::len);
        if grid.iter().any(|row| row.len() != count_v) {
            return Err(SplineError::InvalidGrid("ragged control grid".into()));
        }
        if degree_u == 0 || degree_v == 0 {
            return Err(SplineError::InvalidGrid("surface degrees must be >= 1".into()));
        }
        if knots_u.control_count(degree_u) != Some(count_u) {
            return Err(SplineError::InvalidGrid(format!(
                "{count_u} rows do not match {} u-knots at degree {degree_u}",
                knots_u.len()
            )));
        }
        if knots_v.control_count(degree_v) != Some(count_v) {
            return Err(SplineError::InvalidGrid(format!(
                "{count_v} columns do not match {} v-knots at degree {degree_v}",
                knots_v.len()
            )));
        }
        knots_u.domain(degree_u)?;
        knots_v.domain(degree_v)?;
        let control: Vec<Vec3> = grid.into_iter().flatten().collect();
        if control.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(SplineError::InvalidGrid("non-finite control point".into()));
        }
        Ok(Self {
            name: name.into(),
            degree_u,
            degree_v,
            knots_u,
            knots_v,
            count_u,
            count_v,
            control,
        })
    }

    /// Surface over clamped uniform knot vectors in both directions.
    pub fn clamped(
        name: impl Into<String>,
        degree_u: usize,
        degree_v: usize,
        grid: Vec<Vec<Vec3>>,
    ) -> Result<Self, SplineError> {
        let count_u = grid.len();
        let count_v = grid.first().map_or(0, Vec::len);
        let knots_u = KnotVector::clamped_uniform(count_u, degree_u)?;
        let knots_v = KnotVector::clamped_uniform(count_v, degree_v)?;
        Self::new(name, degree_u, degree_v, knots_u, knots_v, grid)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.degree_u, self.degree_v)
    }

    pub fn knots_u(&self) -> &KnotVector {
        &self.knots_u
    }

    pub fn knots_v(&self) -> &KnotVector {
        &self.knots_v
    }

    /// `(rows along u, columns along v)`.
    pub fn grid_size(&self) -> (usize, usize) {
        (self.count_u, self.count_v)
    }

    pub fn control_point(&self, i: usize, j: usize) -> Vec3 {
        self.control[i * self.count_v + j]
    }

    /// Row-major control points.
    pub fn control_points(&self) -> &[Vec3] {
        &self.control
    }

    pub fn control_row(&self, i: usize) -> &[Vec3] {
        &self.control[i * self.count_v..(i + 1) * self.count_v]
    }

    pub fn domain(&self) -> ((f64, f64), (f64, f64)) {
        // validated at construction
        (
            self.knots_u.domain(self.degree_u).expect("validated knots"),
            self.knots_v.domain(self.degree_v).expect("validated knots"),
        )
    }

    pub fn evaluate(&self, u: f64, v: f64) -> Result<Vec3, SplineError> {
        let bu = basis_functions(&self.knots_u, self.degree_u, u)?;
        let bv = basis_functions(&self.knots_v, self.degree_v, v)?;
        let mut p = Vec3::zeros();
        for &(i, nu) in &bu {
            let mut row = Vec3::zeros();
            for &(j, nv) in &bv {
                row += self.control_point(i, j) * nv;
            }
            p += row * nu;
        }
        Ok(p)
    }

    /// Same surface with every control point mapped through `f`.
    pub fn map_points(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self { control: self.control.iter().map(|&p| f(p)).collect(), ..self.clone() }
    }
}

/// Triangle soup with shared vertices and one unit normal per triangle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Vec<Vec3>,
    /// Zero-area triangles whose normal was borrowed from neighbours.
    pub degenerate: usize,
}

impl TriangleMesh {
    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Concatenate `other`, reindexing its triangles.
    pub fn append(&mut self, other: &TriangleMesh) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]));
        self.normals.extend_from_slice(&other.normals);
        self.degenerate += other.degenerate;
    }
}

// Below this the cross product is treated as zero area.
const AREA_EPS: f64 = 1e-14;

/// Sample the surface on a uniform `sample_u x sample_v` parameter grid and
/// triangulate each cell into two triangles.
///
/// With `closed_u` the last `u` sample column is evaluated (it equals the first
/// bit-for-bit on a seam-duplicated grid) and then welded onto the first.
pub fn tessellate(
    surface: &BSplineSurface,
    sample_u: usize,
    sample_v: usize,
    closed_u: bool,
) -> Result<TriangleMesh, SplineError> {
    if sample_u < 2 || sample_v < 2 {
        return Err(SplineError::InvalidSampling(format!(
            "need at least 2x2 samples, got {sample_u}x{sample_v}"
        )));
    }
    let ((u0, u1), (v0, v1)) = surface.domain();
    let param = |lo: f64, hi: f64, k: usize, n: usize| {
        if k + 1 == n {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    };

    let stored_u = if closed_u { sample_u - 1 } else { sample_u };
    let mut vertices = Vec::with_capacity(stored_u.max(1) * sample_v);
    for i in 0..sample_u {
        let u = param(u0, u1, i, sample_u);
        for j in 0..sample_v {
            let v = param(v0, v1, j, sample_v);
            let p = surface.evaluate(u, v)?;
            if i < stored_u {
                vertices.push(p);
            } else if p != vertices[j] {
                return Err(SplineError::InvalidGrid(format!(
                    "surface '{}' is not closed in u: seam sample {j} differs",
                    surface.name()
                )));
            }
        }
    }

    let index = |i: usize, j: usize| -> u32 {
        let i = if closed_u && i == sample_u - 1 { 0 } else { i };
        (i * sample_v + j) as u32
    };
    let mut triangles = Vec::with_capacity(2 * (sample_u - 1) * (sample_v - 1));
    for i in 0..sample_u - 1 {
        for j in 0..sample_v - 1 {
            let (a, b, c, d) = (index(i, j), index(i + 1, j), index(i + 1, j + 1), index(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }

    let (normals, degenerate) = triangle_normals(&vertices, &triangles);
    Ok(TriangleMesh { vertices, triangles, normals, degenerate })
}

/// Unit face normals. Zero-area faces take the average normal of the valid
/// faces sharing a vertex with them, spreading outward until every face has
/// one; an isolated all-degenerate patch falls back to +z.
fn triangle_normals(vertices: &[Vec3], triangles: &[[u32; 3]]) -> (Vec<Vec3>, usize) {
    let mut normals: Vec<Option<Vec3>> = triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|k| vertices[k as usize]);
            let n = (b - a).cross(&(c - a));
            let len = n.norm();
            (len > AREA_EPS && len.is_finite()).then(|| n / len)
        })
        .collect();
    let degenerate = normals.iter().filter(|n| n.is_none()).count();
    if degenerate == 0 {
        return (normals.into_iter().flatten().collect(), 0);
    }

    let mut vertex_faces: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for (f, t) in triangles.iter().enumerate() {
        for &k in t {
            vertex_faces[k as usize].push(f);
        }
    }
    loop {
        let mut filled = Vec::new();
        for (f, t) in triangles.iter().enumerate() {
            if normals[f].is_some() {
                continue;
            }
            let sum = t
                .iter()
                .flat_map(|&k| vertex_faces[k as usize].iter())
                .filter_map(|&g| normals[g])
                .fold(Vec3::zeros(), |acc, n| acc + n);
            let len = sum.norm();
            if len > AREA_EPS {
                filled.push((f, sum / len));
            }
        }
        if filled.is_empty() {
            break;
        }
        for (f, n) in filled {
            normals[f] = Some(n);
        }
    }
    let normals = normals.into_iter().map(|n| n.unwrap_or_else(Vec3::z)).collect();
    (normals, degenerate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(k: &[f64]) -> KnotVector {
        KnotVector::new(k.to_vec()).unwrap()
    }

    #[test]
    fn clamped_knots_layout() {
        let k = KnotVector::clamped_uniform(4, 2).unwrap();
        assert_eq!(k.as_slice(), &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0][..]);
        let k = KnotVector::clamped_uniform(5, 2).unwrap();
        assert_eq!(k.len(), 8);
        assert_eq!(k.as_slice()[3..5], [1.0 / 3.0, 2.0 / 3.0]);
        let k = KnotVector::clamped_uniform(3, 2).unwrap();
        assert_eq!(k.as_slice(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0][..]);
        assert!(KnotVector::clamped_uniform(2, 2).is_err());
    }

    #[test]
    fn rejects_decreasing_knots() {
        assert!(matches!(
            KnotVector::new(vec![0.0, 0.5, 0.4, 1.0]),
            Err(SplineError::InvalidKnots(_))
        ));
        assert!(KnotVector::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn basis_at_clamped_start() {
        let b = basis_functions(&kv(&[0., 0., 0., 1., 1., 1.]), 2, 0.0).unwrap();
        assert_eq!(b, vec![(0, 1.0), (1, 0.0), (2, 0.0)]);
    }

    #[test]
    fn basis_quadratic_interior_value() {
        // N_{1,2}(u) = 2u(2 - 3u) on [0, 0.5)
        let b = basis_functions(&kv(&[0., 0., 0., 0.5, 1., 1., 1.]), 2, 0.25).unwrap();
        let n1 = b.iter().find(|(i, _)| *i == 1).unwrap().1;
        assert!((n1 - 0.625).abs() < 1e-15);
        let sum: f64 = basis_functions(&kv(&[0., 0., 0., 0.5, 1., 1., 1.]), 2, 0.37)
            .unwrap()
            .iter()
            .map(|(_, n)| n)
            .sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basis_right_endpoint_is_valid() {
        let b = basis_functions(&kv(&[0., 0., 0., 0.5, 1., 1., 1.]), 2, 1.0).unwrap();
        assert_eq!(b.last().unwrap(), &(3, 1.0));
    }

    #[test]
    fn basis_out_of_domain() {
        let k = kv(&[0., 0., 1., 1.]);
        assert!(matches!(basis_functions(&k, 1, 1.5), Err(SplineError::Domain { .. })));
        assert!(matches!(basis_functions(&k, 1, -0.1), Err(SplineError::Domain { .. })));
    }

    #[test]
    fn bilinear_centroid() {
        let grid = vec![
            vec![Vec3::new(0., 0., 0.), Vec3::new(0., 1., 0.)],
            vec![Vec3::new(1., 0., 0.), Vec3::new(1., 1., 0.)],
        ];
        let s = BSplineSurface::clamped("sq", 1, 1, grid).unwrap();
        assert_eq!(s.evaluate(0.5, 0.5).unwrap(), Vec3::new(0.5, 0.5, 0.0));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let grid = vec![vec![Vec3::zeros(); 3]; 3];
        let err = BSplineSurface::new(
            "x",
            2,
            2,
            KnotVector::clamped_uniform(4, 2).unwrap(),
            KnotVector::clamped_uniform(3, 2).unwrap(),
            grid,
        );
        assert!(matches!(err, Err(SplineError::InvalidGrid(_))));
    }

    #[test]
    fn curve_interpolates_ends() {
        let pts = vec![Vec3::new(0., 0., 0.), Vec3::new(1., 2., 0.), Vec3::new(3., 1., 1.), Vec3::new(4., 0., 0.)];
        let c = BSplineCurve::clamped(3, pts.clone()).unwrap();
        assert_eq!(c.evaluate(0.0).unwrap(), pts[0]);
        assert_eq!(c.evaluate(1.0).unwrap(), pts[3]);
    }

    #[test]
    fn tessellation_counts() {
        let grid = vec![
            vec![Vec3::new(0., 0., 0.), Vec3::new(0., 1., 0.)],
            vec![Vec3::new(1., 0., 0.), Vec3::new(1., 1., 0.)],
        ];
        let s = BSplineSurface::clamped("sq", 1, 1, grid).unwrap();
        let m = tessellate(&s, 3, 3, false).unwrap();
        assert_eq!(m.vertices.len(), 9);
        assert_eq!(m.triangles.len(), 8);
        for n in &m.normals {
            assert!((n - m.normals[0]).norm() < 1e-9);
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
        assert!(tessellate(&s, 1, 3, false).is_err());
    }

    #[test]
    fn collapsed_edge_gets_neighbour_normal() {
        // triangle-shaped patch: the v=1 row collapses to a point
        let grid = vec![
            vec![Vec3::new(0., 0., 0.), Vec3::new(0., 1., 0.), Vec3::new(0., 2., 0.)],
            vec![Vec3::new(1., 1., 0.), Vec3::new(1., 1., 0.), Vec3::new(1., 1., 0.)],
        ];
        let s = BSplineSurface::clamped("tip", 1, 2, grid).unwrap();
        let m = tessellate(&s, 4, 5, false).unwrap();
        assert!(m.degenerate > 0);
        for n in &m.normals {
            assert!((n.norm() - 1.0).abs() < 1e-9);
            assert!(n.z.abs() > 0.999);
        }
    }
}

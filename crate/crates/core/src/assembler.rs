//! Whole-plant assembly.
//!
//! Stage 1 integrates the stem internode by internode and sweeps it. Stage 2
//! builds every node's organs against the finished stem; nodes are
//! independent, so they run in parallel and are concatenated in node order.
//!
//! Organ paths: `culm` / `stalk`, `nodeKK/leaf`, `nodeKK/petioleP`,
//! `nodeKK/petioleP/petiolule_S` and `nodeKK/petioleP/petiolule_S/leaflet`
//! with `KK` the two-digit 0-based node index and `S` one of `T`, `L`, `R`.

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::descriptor::{KappaSpec, KappaUnit, LeafSpec, NodeSpec, PlantDescriptor, Side};
use crate::frame::{
    attachment_frame, integrate_centerline, orient_yaw_pitch_roll, Frame, FrameError, FramedCenterline,
    KappaTerm,
};
use crate::leaf::{apply_hinges, build_leaf_grid, hard_graft, soft_blend, GraftSpec, LeafError};
use crate::spline::{tessellate, BSplineSurface, SplineError, TriangleMesh};
use crate::{Family, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("{path}: {source}")]
    Frame { path: String, source: FrameError },
    #[error("{path}: {source}")]
    Leaf { path: String, source: LeafError },
    #[error("{path}: {source}")]
    Spline { path: String, source: SplineError },
    #[error("{path}: {message}")]
    Stem { path: String, message: String },
    #[error("model has no surfaces")]
    Empty,
}

trait AtPath<T> {
    fn at(self, path: &str) -> Result<T, AssemblyError>;
}

impl<T> AtPath<T> for Result<T, FrameError> {
    fn at(self, path: &str) -> Result<T, AssemblyError> {
        self.map_err(|source| AssemblyError::Frame { path: path.into(), source })
    }
}

impl<T> AtPath<T> for Result<T, LeafError> {
    fn at(self, path: &str) -> Result<T, AssemblyError> {
        self.map_err(|source| AssemblyError::Leaf { path: path.into(), source })
    }
}

impl<T> AtPath<T> for Result<T, SplineError> {
    fn at(self, path: &str) -> Result<T, AssemblyError> {
        self.map_err(|source| AssemblyError::Spline { path: path.into(), source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OrganKind {
    Culm,
    Stalk,
    Leaf,
    Petiole,
    Petiolule,
    Leaflet,
}

impl OrganKind {
    pub const ALL: [OrganKind; 6] = [
        OrganKind::Culm,
        OrganKind::Stalk,
        OrganKind::Leaf,
        OrganKind::Petiole,
        OrganKind::Petiolule,
        OrganKind::Leaflet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OrganKind::Culm => "culm",
            OrganKind::Stalk => "stalk",
            OrganKind::Leaf => "leaf",
            OrganKind::Petiole => "petiole",
            OrganKind::Petiolule => "petiolule",
            OrganKind::Leaflet => "leaflet",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Swept tubes are closed around their first parameter.
    pub fn is_tube(self) -> bool {
        matches!(self, OrganKind::Culm | OrganKind::Stalk | OrganKind::Petiole | OrganKind::Petiolule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrganSurface {
    pub path: String,
    pub kind: OrganKind,
    pub surface: BSplineSurface,
}

impl OrganSurface {
    pub fn closed_u(&self) -> bool {
        self.kind.is_tube()
    }

    /// `sample_u` samples along the organ and `sample_v` across (or around) it.
    pub fn tessellate(&self, sample_u: usize, sample_v: usize) -> Result<TriangleMesh, AssemblyError> {
        if self.closed_u() {
            tessellate(&self.surface, sample_v, sample_u, true).at(&self.path)
        } else {
            tessellate(&self.surface, sample_u, sample_v, false).at(&self.path)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub family: Family,
    pub organs: Vec<OrganSurface>,
    /// SHA-256 of the canonical resolved descriptor.
    pub fingerprint: String,
}

impl PlantModel {
    pub fn organ(&self, path: &str) -> Option<&OrganSurface> {
        self.organs.iter().find(|o| o.path == path)
    }

    /// Axis-aligned bounds of all control points (cm); surfaces lie inside
    /// their control hulls.
    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let mut points = self.organs.iter().flat_map(|o| o.surface.control_points().iter());
        let first = *points.next()?;
        Some(points.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
    }

    /// One mesh for every organ, plus the triangle range of each organ.
    pub fn tessellate(
        &self,
        sample_u: usize,
        sample_v: usize,
    ) -> Result<(TriangleMesh, Vec<std::ops::Range<usize>>), AssemblyError> {
        let parts = self
            .organs
            .par_iter()
            .map(|o| o.tessellate(sample_u, sample_v))
            .collect::<Result<Vec<_>, _>>()?;
        let mut mesh = TriangleMesh::default();
        let mut ranges = Vec::with_capacity(parts.len());
        for part in &parts {
            let start = mesh.triangles.len();
            mesh.append(part);
            ranges.push(start..mesh.triangles.len());
        }
        Ok((mesh, ranges))
    }
}

/// Surface counts by organ kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Census {
    pub culm: usize,
    pub stalk: usize,
    pub leaf: usize,
    pub petiole: usize,
    pub petiolule: usize,
    pub leaflet: usize,
}

impl Census {
    pub fn total(&self) -> usize {
        self.culm + self.stalk + self.leaf + self.petiole + self.petiolule + self.leaflet
    }

    pub fn get(&self, kind: OrganKind) -> usize {
        match kind {
            OrganKind::Culm => self.culm,
            OrganKind::Stalk => self.stalk,
            OrganKind::Leaf => self.leaf,
            OrganKind::Petiole => self.petiole,
            OrganKind::Petiolule => self.petiolule,
            OrganKind::Leaflet => self.leaflet,
        }
    }
}

impl std::fmt::Display for Census {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = OrganKind::ALL
            .iter()
            .filter(|k| self.get(**k) > 0)
            .map(|k| format!("{}: {}", k.as_str(), self.get(*k)))
            .collect();
        write!(f, "{} surfaces", self.total())?;
        if !parts.is_empty() {
            write!(f, " ({})", parts.join(", "))?;
        }
        Ok(())
    }
}

pub fn surface_census(organs: &[OrganSurface]) -> Census {
    let mut c = Census::default();
    for o in organs {
        let slot = match o.kind {
            OrganKind::Culm => &mut c.culm,
            OrganKind::Stalk => &mut c.stalk,
            OrganKind::Leaf => &mut c.leaf,
            OrganKind::Petiole => &mut c.petiole,
            OrganKind::Petiolule => &mut c.petiolule,
            OrganKind::Leaflet => &mut c.leaflet,
        };
        *slot += 1;
    }
    c
}

/// Canonical hash of a resolved descriptor.
pub fn fingerprint(pd: &PlantDescriptor) -> String {
    let text = pd.to_raw().to_yaml().unwrap_or_default();
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// The integrated stem with node positions.
#[derive(Debug, Clone)]
pub struct Stem {
    pub centerline: FramedCenterline,
    /// Vertex index of each node.
    pub node_vertices: Vec<usize>,
}

impl Stem {
    pub fn node_fraction(&self, k: usize) -> f64 {
        self.centerline.arclength()[self.node_vertices[k]] / self.centerline.length()
    }
}

fn stem_terms(curvature: &[KappaSpec], unit: KappaUnit, path: &str) -> Result<Vec<KappaTerm>, AssemblyError> {
    curvature.iter().map(|t| t.to_term(unit, &Vec3::x(), &Vec3::y()).at(path)).collect()
}

/// Arclength of the internode starting at `origin` whose end reaches height
/// `z_end`, by secant iteration on the integrated end height.
fn internode_length(
    origin: Vec3,
    tangent: Vec3,
    z_end: f64,
    n_seg: usize,
    terms: &[KappaTerm],
    path: &str,
) -> Result<f64, AssemblyError> {
    let rise = z_end - origin.z;
    let height = |len: f64| -> Result<f64, AssemblyError> {
        Ok(integrate_centerline(origin, tangent, len, n_seg, terms).at(path)?.points[n_seg].z - z_end)
    };
    let unreachable = || AssemblyError::Stem {
        path: path.into(),
        message: format!("internode cannot reach node height {z_end} cm with the given curvature"),
    };
    let (mut a, mut b) = (rise, rise * 1.05);
    let (mut fa, mut fb) = (height(a)?, height(b)?);
    for _ in 0..100 {
        if fb.abs() <= 1e-11 * z_end.abs().max(1.0) {
            return Ok(b);
        }
        let slope = (fb - fa) / (b - a);
        if !(slope > 0.0) || !slope.is_finite() {
            return Err(unreachable());
        }
        let next = (b - fb / slope).clamp(0.5 * b, 4.0 * b);
        a = b;
        fa = fb;
        b = next;
        fb = height(b)?;
    }
    Err(unreachable())
}

/// Stage 1: centerline through every node height, optional straight apical
/// extension, transported frames, radii linear in arclength between nodes.
pub fn build_stem(pd: &PlantDescriptor) -> Result<Stem, AssemblyError> {
    let path = stem_path(pd.family);
    let mut points = vec![Vec3::zeros()];
    let mut tangent = Vec3::z();
    let mut node_vertices = Vec::with_capacity(pd.nodes.len());
    for (k, node) in pd.nodes.iter().enumerate() {
        let ipath = format!("{path} internode {k}");
        let terms = stem_terms(&node.internode_curvature(), pd.kappa_unit, &ipath)?;
        let origin = *points.last().expect("origin pushed");
        let length = internode_length(origin, tangent, node.z, pd.n_seg, &terms, &ipath)?;
        let seg = integrate_centerline(origin, tangent, length, pd.n_seg, &terms).at(&ipath)?;
        points.extend_from_slice(&seg.points[1..]);
        points.last_mut().expect("non-empty").z = node.z;
        tangent = seg.end_tangent;
        node_vertices.push(points.len() - 1);
    }
    if pd.apical_extension > 0.0 {
        let steps = (pd.n_seg / 4).max(1);
        let origin = *points.last().expect("non-empty");
        let ds = pd.apical_extension / steps as f64;
        points.extend((1..=steps).map(|i| origin + tangent * (ds * i as f64)));
    }

    let mut arclength = vec![0.0];
    for w in points.windows(2) {
        arclength.push(arclength.last().unwrap() + (w[1] - w[0]).norm());
    }
    let node_s: Vec<f64> = node_vertices.iter().map(|&i| arclength[i]).collect();
    let node_r: Vec<f64> = pd.nodes.iter().map(|n| n.diameter_mm / 20.0).collect();
    let radii = arclength
        .iter()
        .map(|&s| {
            let k = node_s.partition_point(|&x| x < s);
            if k == 0 {
                node_r[0]
            } else if k == node_s.len() {
                node_r[k - 1]
            } else {
                let w = (s - node_s[k - 1]) / (node_s[k] - node_s[k - 1]);
                node_r[k - 1] * (1.0 - w) + node_r[k] * w
            }
        })
        .collect();
    let centerline = FramedCenterline::new(points, radii, &Vec3::x()).at(path)?;
    Ok(Stem { centerline, node_vertices })
}

fn stem_path(family: Family) -> &'static str {
    match family {
        Family::Monocot => "culm",
        Family::Dicot => "stalk",
    }
}

/// Build every surface of the plant.
pub fn generate_plant(pd: &PlantDescriptor) -> Result<PlantModel, AssemblyError> {
    let stem = build_stem(pd)?;
    let stem_kind = match pd.family {
        Family::Monocot => OrganKind::Culm,
        Family::Dicot => OrganKind::Stalk,
    };
    let path = stem_path(pd.family);
    let stem_surface = crate::frame::sweep_surface(&stem.centerline, pd.ring_samples, path).at(path)?;

    let per_node = pd
        .nodes
        .par_iter()
        .enumerate()
        .map(|(k, node)| match pd.family {
            Family::Monocot => monocot_leaf(&stem, k, node).map(|o| o.into_iter().collect::<Vec<_>>()),
            Family::Dicot => dicot_organs(pd, &stem, k, node),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut organs = vec![OrganSurface { path: path.into(), kind: stem_kind, surface: stem_surface }];
    organs.extend(per_node.into_iter().flatten());
    Ok(PlantModel { family: pd.family, organs, fingerprint: fingerprint(pd) })
}

fn node_path(k: usize) -> String {
    format!("node{k:02}")
}

fn monocot_leaf(
    stem: &Stem,
    k: usize,
    node: &NodeSpec,
) -> Result<Option<OrganSurface>, AssemblyError> {
    let leaf = &node.leaf;
    if !node.bears_leaf || !leaf.enabled {
        return Ok(None);
    }
    let path = format!("{}/leaf", node_path(k));
    let culm = &stem.centerline;
    let grid = build_leaf_grid(&leaf.params(), leaf.ctrl_u, leaf.ctrl_v, Family::Monocot).at(&path)?;
    let grid = apply_hinges(&grid, &leaf.hinges).at(&path)?;

    let top = node.z + leaf.graft_dz;
    let s = culm.fraction_at_height(top).at(&path)?;
    let (axis_point, radius, culm_frame) = culm.sample(s);
    let (_, frame) = attachment_frame(culm, s, node.azimuth_deg, node.pitch_deg, node.roll_deg);
    let frame = orient_yaw_pitch_roll(&frame, leaf.yaw_deg, leaf.pitch_deg, leaf.roll_deg);
    let (sa, ca) = node.azimuth_deg.to_radians().sin_cos();
    let origin = axis_point + (culm_frame.n * ca + culm_frame.b * sa) * (radius + leaf.graft_dr);
    let placed = grid.placed(&origin, &frame);

    let graft = GraftSpec {
        z_node: node.z,
        rows: leaf.graft_rows,
        dz: leaf.graft_dz,
        azimuth_deg: node.azimuth_deg,
        arc_span_deg: leaf.graft_arc_deg,
        radial_offset: leaf.graft_dr,
    };
    let mut grafted = hard_graft(&placed, culm, &graft).at(&path)?;
    if leaf.blend_u > 0.0 {
        grafted = blend_onto_culm(&grafted, culm, &graft, leaf, &path)?;
    }
    let surface = grafted.to_surface(&path).at(&path)?;
    Ok(Some(OrganSurface { path, kind: OrganKind::Leaf, surface }))
}

/// Pull the rows just above the graft toward the culm arc at each row's own
/// height (clamped to the culm).
fn blend_onto_culm(
    grid: &crate::leaf::LeafGrid,
    culm: &FramedCenterline,
    graft: &GraftSpec,
    leaf: &LeafSpec,
    path: &str,
) -> Result<crate::leaf::LeafGrid, AssemblyError> {
    let z_lo = culm.points()[0].z;
    let z_hi = culm.points().iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
    let columns = grid.columns();
    let mid = grid.midrib_column();
    let ring_rows = grid
        .points
        .iter()
        .map(|row| {
            let z = row[mid].z.clamp(z_lo, z_hi);
            (0..columns).map(|j| graft.ring_point(culm, z, j, columns)).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .at(path)?;
    soft_blend(grid, leaf.blend_u, leaf.graft_rows, &ring_rows).at(path)
}

fn branch_segments(pd: &PlantDescriptor) -> usize {
    (pd.n_seg / 4).max(4)
}

/// A swept branch from `origin` along `frame.t`.
fn sweep_branch(
    pd: &PlantDescriptor,
    origin: Vec3,
    frame: &Frame,
    branch: &crate::descriptor::BranchSpec,
    path: &str,
) -> Result<(BSplineSurface, FramedCenterline), AssemblyError> {
    let terms = branch
        .curvature()
        .iter()
        .map(|t| t.to_term(pd.kappa_unit, &frame.n, &frame.b))
        .collect::<Result<Vec<_>, _>>()
        .at(path)?;
    let n = branch_segments(pd);
    let line = integrate_centerline(origin, frame.t, branch.length, n, &terms).at(path)?;
    let radii = vec![branch.diameter_mm / 20.0; line.points.len()];
    let centerline = FramedCenterline::new(line.points, radii, &frame.n).at(path)?;
    let surface = crate::frame::sweep_surface(&centerline, pd.ring_samples, path).at(path)?;
    Ok((surface, centerline))
}

fn tip(centerline: &FramedCenterline) -> (Vec3, Frame) {
    let last = centerline.points().len() - 1;
    (centerline.points()[last], centerline.frames()[last])
}

fn dicot_organs(
    pd: &PlantDescriptor,
    stem: &Stem,
    k: usize,
    node: &NodeSpec,
) -> Result<Vec<OrganSurface>, AssemblyError> {
    if !node.bears_leaf {
        return Ok(Vec::new());
    }
    let mut organs = Vec::new();
    let count = node.petioles.len();
    let s = stem.node_fraction(k);
    for (p, spec) in node.petioles.iter().enumerate() {
        let ppath = format!("{}/petiole{p}", node_path(k));
        let petiole = &spec.petiole;
        let azimuth = node.azimuth_deg + 360.0 * p as f64 / count as f64 + petiole.yaw_deg;
        let (base, frame) = attachment_frame(
            &stem.centerline,
            s,
            azimuth,
            node.pitch_deg + petiole.pitch_deg,
            node.roll_deg + petiole.roll_deg,
        );
        let (surface, line) = sweep_branch(pd, base, &frame, petiole, &ppath)?;
        organs.push(OrganSurface { path: ppath.clone(), kind: OrganKind::Petiole, surface });
        let (p_tip, p_frame) = tip(&line);

        for side in &spec.sides {
            let spath = format!("{ppath}/petiolule_{}", side.side.tag());
            let stalk = &side.petiolule;
            let yaw = match side.side {
                Side::Terminal => 0.0,
                s => s.yaw_sign() * stalk.lateral_yaw_deg,
            } + stalk.yaw_deg;
            let f = orient_yaw_pitch_roll(&p_frame, yaw, stalk.pitch_deg, stalk.roll_deg);
            let (surface, line) = sweep_branch(pd, p_tip, &f, stalk, &spath)?;
            organs.push(OrganSurface { path: spath.clone(), kind: OrganKind::Petiolule, surface });

            let leaflet = &side.leaflet;
            if !leaflet.enabled {
                continue;
            }
            let lpath = format!("{spath}/leaflet");
            let (l_tip, l_frame) = tip(&line);
            let grid = build_leaf_grid(&leaflet.params(), leaflet.ctrl_u, leaflet.ctrl_v, Family::Dicot)
                .at(&lpath)?;
            let grid = apply_hinges(&grid, &leaflet.hinges).at(&lpath)?;
            let frame = orient_yaw_pitch_roll(&l_frame, leaflet.yaw_deg, leaflet.pitch_deg, leaflet.roll_deg);
            let mut placed = grid.placed(&l_tip, &frame);
            placed.points[0].iter_mut().for_each(|q| *q = l_tip);
            let surface = placed.to_surface(&lpath).at(&lpath)?;
            organs.push(OrganSurface { path: lpath, kind: OrganKind::Leaflet, surface });
        }
    }
    Ok(organs)
}

//! Model-to-cloud agreement: area-weighted surface sampling and the symmetric
//! Chamfer distance.
//!
//! The Chamfer distance is the mean of the two directed mean nearest-neighbour
//! distances, unsquared, reported in metres. Inputs are in centimetres.

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::assembler::{AssemblyError, PlantModel};
use crate::io::PointCloud;
use crate::spline::TriangleMesh;
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamferReport {
    /// `(forward + backward) / 2`, metres.
    pub cd: f64,
    /// Mean distance from each point of the first cloud to the second, metres.
    pub forward: f64,
    /// Mean distance from each point of the second cloud to the first, metres.
    pub backward: f64,
    pub count_a: usize,
    pub count_b: usize,
}

const CM_PER_M: f64 = 100.0;

type Tree = ImmutableKdTree<f64, u32, 3, 32>;

/// Exact nearest-neighbour index over a fixed point set.
pub struct NearestIndex<'a> {
    points: &'a [Vec3],
    tree: Tree,
}

impl<'a> NearestIndex<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        Self { points, tree: Tree::new_from_slice(&coords) }
    }

    /// Distance from `q` to its nearest indexed point.
    pub fn distance(&self, q: &Vec3) -> f64 {
        let hit = self.tree.nearest_one::<SquaredEuclidean>(&[q.x, q.y, q.z]);
        (self.points[hit.item as usize] - q).norm()
    }

    /// Mean nearest distance of `queries`, summed in query order.
    pub fn mean_distance(&self, queries: &[Vec3]) -> f64 {
        let d: Vec<f64> = queries.par_iter().map(|q| self.distance(q)).collect();
        d.iter().sum::<f64>() / d.len() as f64
    }
}

/// Symmetric Chamfer distance between two clouds in centimetres.
pub fn chamfer_points(a: &[Vec3], b: &[Vec3]) -> Result<ChamferReport, MetricsError> {
    if a.is_empty() {
        return Err(MetricsError::Empty("first cloud"));
    }
    if b.is_empty() {
        return Err(MetricsError::Empty("second cloud"));
    }
    let (forward, backward) =
        rayon::join(|| NearestIndex::new(b).mean_distance(a), || NearestIndex::new(a).mean_distance(b));
    let (forward, backward) = (forward / CM_PER_M, backward / CM_PER_M);
    Ok(ChamferReport { cd: (forward + backward) / 2.0, forward, backward, count_a: a.len(), count_b: b.len() })
}

pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<ChamferReport, MetricsError> {
    chamfer_points(&a.points, &b.points)
}

/// `n` points on the mesh, triangles chosen with probability proportional to
/// area and positions uniform within each triangle.
pub fn sample_mesh(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud, MetricsError> {
    if n == 0 {
        return Err(MetricsError::NoSamples);
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(MetricsError::Empty("mesh surface area"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let pick = rng.gen::<f64>() * total;
            let t = cumulative.partition_point(|&c| c <= pick).min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(t);
            let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
            let s = r1.sqrt();
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect();
    Ok(PointCloud::new(points))
}

/// Tessellate every organ at `sample_u x sample_v` and sample the result.
pub fn sample_model(
    model: &PlantModel,
    n: usize,
    seed: u64,
    sample_u: usize,
    sample_v: usize,
) -> Result<PointCloud, MetricsError> {
    if model.organs.is_empty() {
        return Err(MetricsError::Empty("model"));
    }
    let (mesh, _) = model.tessellate(sample_u, sample_v)?;
    sample_mesh(&mesh, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(a: &[Vec3], b: &[Vec3]) -> f64 {
        let mean = |x: &[Vec3], y: &[Vec3]| {
            x.iter().map(|p| y.iter().map(|q| (q - p).norm()).fold(f64::INFINITY, f64::min)).sum::<f64>()
                / x.len() as f64
        };
        (mean(a, b) + mean(b, a)) / 2.0 / CM_PER_M
    }

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()) * 50.0).collect()
    }

    #[test]
    fn identical_clouds_are_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = cloud(&mut rng, 500);
        assert_eq!(chamfer_points(&a, &a).unwrap().cd, 0.0);
    }

    #[test]
    fn single_pair() {
        let r = chamfer_points(&[Vec3::zeros()], &[Vec3::new(0.0, 0.0, 300.0)]).unwrap();
        assert_eq!((r.cd, r.forward, r.backward), (3.0, 3.0, 3.0));
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = cloud(&mut rng, 200);
        let b = cloud(&mut rng, 300);
        let r = chamfer_points(&a, &b).unwrap();
        let o = brute(&a, &b);
        assert!((r.cd - o).abs() <= 1e-12 * o);
    }

    #[test]
    fn duplicates_and_coplanar_points() {
        let mut a: Vec<Vec3> = vec![Vec3::new(1.0, 1.0, 0.0); 100];
        a.extend((0..200).map(|i| Vec3::new((i % 20) as f64, (i / 20) as f64, 0.0)));
        let b: Vec<Vec3> = (0..150).map(|i| Vec3::new(i as f64 * 0.13, (i % 7) as f64, 0.0)).collect();
        let r = chamfer_points(&a, &b).unwrap();
        assert!((r.cd - brute(&a, &b)).abs() <= 1e-12 * r.cd);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(chamfer_points(&[], &[Vec3::zeros()]), Err(MetricsError::Empty("first cloud")));
    }

    fn unit_square() -> TriangleMesh {
        TriangleMesh {
            vertices: vec![Vec3::zeros(), Vec3::x(), Vec3::new(1.0, 1.0, 0.0), Vec3::y()],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            normals: vec![Vec3::z(); 2],
            degenerate: 0,
        }
    }

    #[test]
    fn uniform_on_unit_square() {
        let c = sample_mesh(&unit_square(), 10_000, 3).unwrap();
        let mean = c.points.iter().sum::<Vec3>() / c.len() as f64;
        assert!((mean - Vec3::new(0.5, 0.5, 0.0)).norm() < 0.02, "{mean}");
        assert!(c.points.iter().all(|p| p.z == 0.0 && (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y)));
    }

    #[test]
    fn single_sample_and_determinism() {
        let one = sample_mesh(&unit_square(), 1, 9).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(sample_mesh(&unit_square(), 100, 9).unwrap(), sample_mesh(&unit_square(), 100, 9).unwrap());
        assert_eq!(sample_mesh(&unit_square(), 0, 9), Err(MetricsError::NoSamples));
    }
}

use phyllo::frame::{integrate_centerline, parallel_transport, rotate_about_axis, KappaTerm};
use phyllo::leaf::{apply_hinges, build_leaf_grid, HingeAxis, HingeSpec, LeafParams};
use phyllo::metrics::{chamfer_points, sample_mesh};
use phyllo::spline::basis_functions;
use phyllo::{Family, KnotVector, TriangleMesh, Vec3};
use proptest::prelude::*;

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn clamped_knots() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (1usize..=5, 0usize..10).prop_flat_map(|(p, interior)| {
        prop::collection::vec(0.0..1.0f64, interior).prop_map(move |mut inner| {
            inner.sort_by(f64::total_cmp);
            let mut k = vec![0.0; p + 1];
            k.extend(inner);
            k.extend(vec![1.0; p + 1]);
            (k, p)
        })
    })
}

proptest! {
    #[test]
    fn basis_is_a_partition_of_unity((knots, p) in clamped_knots(), u in 0.0..=1.0f64) {
        let kv = KnotVector::new(knots).unwrap();
        let values = basis_functions(&kv, p, u).unwrap();
        prop_assert!(values.iter().all(|&(_, v)| v >= 0.0));
        prop_assert!(values.len() <= p + 1);
        let sum: f64 = values.iter().map(|(_, v)| v).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12, "sum {}", sum);
    }

    #[test]
    fn rotation_preserves_length_and_axis_component(
        axis in vec3(1.0).prop_filter("non-zero", |a| a.norm() > 1e-3),
        theta in -10.0..10.0f64,
        x in vec3(100.0),
    ) {
        let axis = axis.normalize();
        let y = rotate_about_axis(&axis, theta, &x).unwrap();
        prop_assert!((y.norm() - x.norm()).abs() <= 1e-12 * (1.0 + x.norm()));
        prop_assert!((y.dot(&axis) - x.dot(&axis)).abs() <= 1e-12 * (1.0 + x.norm()));
        let back = rotate_about_axis(&axis, -theta, &y).unwrap();
        prop_assert!((back - x).norm() <= 1e-11 * (1.0 + x.norm()));
    }

    #[test]
    fn centerline_has_the_requested_length(
        length in 0.5..300.0f64,
        n_seg in 1usize..200,
        terms in prop::collection::vec((0.0..0.1f64, 0.0..360.0f64, 0.0..0.5f64, 0.5..1.0f64), 0..4),
    ) {
        let terms: Vec<KappaTerm> = terms
            .into_iter()
            .map(|(k, az, a, b)| KappaTerm::from_azimuth(k, az, (a, b)).unwrap())
            .collect();
        let path = integrate_centerline(Vec3::zeros(), Vec3::z(), length, n_seg, &terms).unwrap();
        let total: f64 = path.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        prop_assert_eq!(path.points.len(), n_seg + 1);
        prop_assert!((total - length).abs() <= 1e-9 * length);
        prop_assert!((path.end_tangent.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn transported_frames_are_orthonormal(
        kappa in 0.0..0.1f64,
        az in 0.0..360.0f64,
        twist_az in 0.0..360.0f64,
        n_seg in 2usize..100,
    ) {
        let terms = [
            KappaTerm::from_azimuth(kappa, az, (0.0, 1.0)).unwrap(),
            KappaTerm::from_azimuth(kappa / 2.0, twist_az, (0.3, 0.7)).unwrap(),
        ];
        let path = integrate_centerline(Vec3::zeros(), Vec3::z(), 80.0, n_seg, &terms).unwrap();
        for f in parallel_transport(&path.points, &Vec3::x()).unwrap() {
            prop_assert!((f.t.norm() - 1.0).abs() <= 1e-12);
            prop_assert!((f.n.norm() - 1.0).abs() <= 1e-12);
            prop_assert!(f.t.dot(&f.n).abs() <= 1e-12);
            prop_assert!((f.t.cross(&f.n) - f.b).norm() <= 1e-12);
        }
    }

    #[test]
    fn hinges_preserve_distance_to_the_pivot(
        u0 in 0.05..0.95f64,
        angle in -120.0..120.0f64,
        smooth in 0.0..0.2f64,
        axis in prop_oneof![Just(HingeAxis::T), Just(HingeAxis::N), Just(HingeAxis::B)],
        twist in -1.0..1.0f64,
        fold in -0.3..0.3f64,
    ) {
        let params = LeafParams { length: 60.0, width: 7.0, twist, fold, camber: 0.02, ..LeafParams::default() };
        let flat = build_leaf_grid(&params, 21, 7, Family::Monocot).unwrap();
        let hinge = HingeSpec { u0, angle_deg: angle, axis, smooth };
        let bent = apply_hinges(&flat, &[hinge]).unwrap();
        let i0 = (0..flat.rows())
            .min_by(|&a, &b| (flat.u[a] - u0).abs().total_cmp(&(flat.u[b] - u0).abs()))
            .unwrap();
        for i in 0..flat.rows() {
            for j in 0..flat.columns() {
                if flat.u[i] < u0 {
                    prop_assert_eq!(bent.points[i][j], flat.points[i][j]);
                }
                let before = (flat.points[i][j] - flat.points[i0][j]).norm();
                let after = (bent.points[i][j] - bent.points[i0][j]).norm();
                prop_assert!((before - after).abs() <= 1e-9, "row {} column {}", i, j);
            }
        }
    }

    #[test]
    fn chamfer_is_symmetric_and_translation_invariant(
        a in prop::collection::vec(vec3(50.0), 1..60),
        b in prop::collection::vec(vec3(50.0), 1..60),
        shift in vec3(20.0),
    ) {
        let ab = chamfer_points(&a, &b).unwrap();
        let ba = chamfer_points(&b, &a).unwrap();
        prop_assert_eq!(ab.cd, ba.cd);
        prop_assert_eq!((ab.forward, ab.backward), (ba.backward, ba.forward));
        prop_assert!(ab.cd >= 0.0);
        let a2: Vec<Vec3> = a.iter().map(|p| p + shift).collect();
        let b2: Vec<Vec3> = b.iter().map(|p| p + shift).collect();
        let moved = chamfer_points(&a2, &b2).unwrap();
        prop_assert!((moved.cd - ab.cd).abs() <= 1e-9 * (1.0 + ab.cd));
    }

    #[test]
    fn sampling_is_deterministic_and_on_the_mesh(seed in any::<u64>(), n in 1usize..500, h in 0.1..10.0f64) {
        let mesh = TriangleMesh {
            vertices: vec![Vec3::zeros(), Vec3::x(), Vec3::new(0.0, h, 0.0)],
            triangles: vec![[0, 1, 2]],
            normals: vec![Vec3::z()],
            degenerate: 0,
        };
        let a = sample_mesh(&mesh, n, seed).unwrap();
        prop_assert_eq!(&a, &sample_mesh(&mesh, n, seed).unwrap());
        for p in &a.points {
            prop_assert!(p.z == 0.0 && p.x >= -1e-12 && p.y >= -1e-12 && p.x + p.y / h <= 1.0 + 1e-12);
        }
    }
}

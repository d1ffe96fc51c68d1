mod common;

use std::io::Cursor;

use phyllo::io::{read_smesh, read_stl, stl_bytes, write_smesh, StlMode};
use phyllo::{generate_plant, TriangleMesh, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_cube() -> TriangleMesh {
    let vertices: Vec<Vec3> =
        (0..8).map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64)).collect();
    let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
    let mut triangles = Vec::new();
    for q in quads {
        triangles.push([q[0], q[1], q[2]]);
        triangles.push([q[0], q[2], q[3]]);
    }
    let normals = triangles
        .iter()
        .map(|t: &[u32; 3]| {
            let [a, b, c] = t.map(|k| vertices[k as usize]);
            (b - a).cross(&(c - a)).normalize()
        })
        .collect();
    TriangleMesh { vertices, triangles, normals, degenerate: 0 }
}

fn sorted_corners(mut v: Vec<[f32; 3]>) -> Vec<[f32; 3]> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

#[test]
fn third_party_reader_parses_cube() {
    let mesh = unit_cube();
    let ours: Vec<[f32; 3]> = (0..12)
        .flat_map(|t| mesh.triangle(t).map(|p| [p.x as f32, p.y as f32, p.z as f32]))
        .collect();
    for mode in [StlMode::Binary, StlMode::Ascii] {
        let bytes = stl_bytes(&mesh, mode, "cube");
        let indexed = stl_io::read_stl(&mut Cursor::new(&bytes)).unwrap();
        assert_eq!(indexed.faces.len(), 12);
        let theirs: Vec<[f32; 3]> = indexed
            .faces
            .iter()
            .flat_map(|f| f.vertices.map(|k| {
                let v = indexed.vertices[k];
                [v[0], v[1], v[2]]
            }))
            .collect();
        assert_eq!(sorted_corners(theirs), sorted_corners(ours.clone()), "{mode:?}");
    }
}

#[test]
fn maize_stl_parses_with_third_party_reader() {
    let model = generate_plant(&common::load("ci90c.yaml")).unwrap();
    let (mesh, _) = model.tessellate(64, 16).unwrap();
    let bytes = stl_bytes(&mesh, StlMode::Binary, "ci90c");
    assert_eq!(bytes.len(), 84 + 50 * mesh.triangles.len());
    let indexed = stl_io::read_stl(&mut Cursor::new(&bytes)).unwrap();
    assert_eq!(indexed.faces.len(), mesh.triangles.len());
    assert_eq!(read_stl(&bytes).unwrap().len(), mesh.triangles.len());
}

#[test]
fn smesh_round_trip_preserves_maize_model() {
    let model = generate_plant(&common::load("cml238.yaml")).unwrap();
    let text = write_smesh(&model);
    let back = read_smesh(&text).unwrap().into_model();
    assert_eq!(back.organs.len(), 11);
    let paths: Vec<&str> = back.organs.iter().map(|o| o.path.as_str()).collect();
    let original: Vec<&str> = model.organs.iter().map(|o| o.path.as_str()).collect();
    assert_eq!(paths, original);
    assert_eq!(back, model);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (a, b) in model.organs.iter().zip(&back.organs) {
        for _ in 0..100 {
            let (u, v) = (rng.gen::<f64>(), rng.gen::<f64>());
            let d = (a.surface.evaluate(u, v).unwrap() - b.surface.evaluate(u, v).unwrap()).norm();
            assert!(d <= 1e-9);
        }
    }
    assert_eq!(write_smesh(&back), text);
}

#[test]
fn smesh_round_trip_dicot() {
    let model = generate_plant(&common::load("trifoliate.yaml")).unwrap();
    assert_eq!(read_smesh(&write_smesh(&model)).unwrap().into_model(), model);
}

fn arb_mesh() -> impl Strategy<Value = TriangleMesh> {
    (0usize..40).prop_flat_map(|t| {
        proptest::collection::vec(prop::array::uniform3(-1e3f64..1e3), 3 * t).prop_map(move |pts| {
            let vertices: Vec<Vec3> = pts.iter().map(|p| Vec3::from(*p)).collect();
            let triangles = (0..t as u32).map(|k| [3 * k, 3 * k + 1, 3 * k + 2]).collect();
            TriangleMesh { vertices, triangles, normals: vec![Vec3::z(); t], degenerate: 0 }
        })
    })
}

proptest! {
    #[test]
    fn binary_size_formula(mesh in arb_mesh()) {
        let bytes = stl_bytes(&mesh, StlMode::Binary, "m");
        prop_assert_eq!(bytes.len(), 84 + 50 * mesh.triangles.len());
        let facets = read_stl(&bytes).unwrap();
        prop_assert_eq!(facets.len(), mesh.triangles.len());
    }
}

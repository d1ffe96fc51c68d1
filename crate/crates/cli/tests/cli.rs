use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use phyllo::io::{read_smesh, read_stl, write_ply, write_xyz, LengthUnit, PointCloud};
use phyllo::metrics::sample_model;
use phyllo::{generate_plant, parse_descriptor, resolve_parameters, Vec3};
use tempfile::TempDir;

fn descriptor(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../descriptors").join(name)
}

fn phyllo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phyllo"))
        .args(args)
        .current_dir(dir)
        .env_remove("PHYLLO_OUT_DIR")
        .output()
        .expect("run phyllo")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// The cloud `fit-report` itself samples: 50k points, descriptor seed, 64x16.
fn self_sample(name: &str) -> PointCloud {
    let pd = resolve_parameters(&parse_descriptor(&std::fs::read_to_string(descriptor(name)).unwrap()).unwrap()).unwrap();
    let model = generate_plant(&pd).unwrap();
    sample_model(&model, 50_000, pd.seed, 64, 16).unwrap()
}

#[test]
fn generate_writes_outputs_that_parse() {
    let dir = TempDir::new().unwrap();
    let pd = descriptor("cml238.yaml");
    let out = phyllo(dir.path(), &["generate", pd.to_str().unwrap(), "--stl", "m.stl", "--smesh", "m.smesh"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("census: 11 surfaces (culm: 1, leaf: 10)"), "{stdout}");
    assert!(stdout.contains("bounding box (cm): min ("), "{stdout}");

    let stl = std::fs::read(dir.path().join("m.stl")).unwrap();
    let triangles = read_stl(&stl).unwrap().len();
    assert_eq!(stl.len(), 84 + 50 * triangles);
    let doc = read_smesh(&std::fs::read_to_string(dir.path().join("m.smesh")).unwrap()).unwrap();
    assert_eq!(doc.organs.len(), 11);
    assert_eq!(doc.organs[0].path, "culm");
}

#[test]
fn generate_is_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let pd = descriptor("trifoliate.yaml");
    for name in ["a", "b"] {
        let smesh = format!("{name}.smesh");
        let stl = format!("{name}.stl");
        let out = phyllo(dir.path(), &["generate", pd.to_str().unwrap(), "--stl", &stl, "--smesh", &smesh]);
        assert!(out.status.success(), "{}", text(&out.stderr));
    }
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.smesh"), read("b.smesh"));
    assert_eq!(read("a.stl"), read("b.stl"));
}

#[test]
fn generate_uses_the_output_directory_variable() {
    let dir = TempDir::new().unwrap();
    let pd = descriptor("cml238.yaml");
    let out = Command::new(env!("CARGO_BIN_EXE_phyllo"))
        .args(["generate", pd.to_str().unwrap(), "--stl-mode", "ascii"])
        .current_dir(dir.path())
        .env("PHYLLO_OUT_DIR", dir.path().join("exports"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stl = std::fs::read(dir.path().join("exports/maize_CML238.stl")).unwrap();
    assert!(stl.starts_with(b"solid"));
    assert!(dir.path().join("exports/maize_CML238.smesh").is_file());
}

#[test]
fn missing_descriptor_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = phyllo(dir.path(), &["generate", "absent.yaml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("descriptor not found"), "{}", text(&out.stderr));
}

#[test]
fn invalid_descriptor_reports_the_offending_key() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.yaml"), "node-z: [10, 20, 30]\nstem-diameter-mm: [20, 18]\n").unwrap();
    let out = phyllo(dir.path(), &["generate", "bad.yaml"]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("bad.yaml") && err.contains("stem-diameter-mm"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn seeded_template_generates() {
    let dir = TempDir::new().unwrap();
    let out = phyllo(
        dir.path(),
        &["seed", "--node-z", "8,20,34,47,60,74,83,96,109,127", "--leaves", "10", "seed.yaml"],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let yaml = std::fs::read_to_string(dir.path().join("seed.yaml")).unwrap();
    let raw = parse_descriptor(&yaml).unwrap();
    let pd = resolve_parameters(&raw).unwrap();
    let az: Vec<f64> = pd.nodes.iter().map(|n| n.azimuth_deg).collect();
    assert_eq!(az, [0.0, 180.0, 0.0, 180.0, 0.0, 180.0, 0.0, 180.0, 0.0, 180.0]);

    let out = phyllo(dir.path(), &["generate", "seed.yaml"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("11 surfaces"));
}

#[test]
fn seed_rejects_more_leaves_than_nodes() {
    let dir = TempDir::new().unwrap();
    let out = phyllo(dir.path(), &["seed", "--node-z", "8,20", "--leaves", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

fn cd_line(stdout: &str) -> f64 {
    let line = stdout.lines().find(|l| l.starts_with("chamfer distance:")).expect("CD line");
    line.split_whitespace().nth(2).unwrap().parse().unwrap()
}

#[test]
fn fit_report_self_fit_and_history() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("self.xyz"), write_xyz(&self_sample("cml238.yaml"), LengthUnit::M)).unwrap();
    let pd = descriptor("cml238.yaml");
    for _ in 0..2 {
        let out = phyllo(dir.path(), &["fit-report", pd.to_str().unwrap(), "self.xyz", "--history", "h.jsonl"]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        let stdout = text(&out.stdout);
        assert!(cd_line(&stdout) < 1e-6, "{stdout}");
        assert!(stdout.contains("model -> cloud") && stdout.contains("cloud -> model"));
        assert!(!text(&out.stderr).contains("warning"));
    }
    let records: Vec<serde_json::Value> = std::fs::read_to_string(dir.path().join("h.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 2);
    let ts: Vec<chrono::DateTime<chrono::Utc>> =
        records.iter().map(|r| r["timestamp"].as_str().unwrap().parse().unwrap()).collect();
    assert!(ts[1] > ts[0]);
    assert_eq!(records[0]["pd_hash"], records[1]["pd_hash"]);
    assert_eq!(records[0]["pd_hash"].as_str().unwrap().len(), 64);
    assert!(records[0]["cd_m"].as_f64().unwrap() < 1e-6);
}

#[test]
fn fit_report_offset_cloud_and_unit_warning() {
    let dir = TempDir::new().unwrap();
    let sample = self_sample("trifoliate.yaml");
    // 10 km away along x: every nearest distance is the offset to within the plant size.
    let far = PointCloud::new(sample.points.iter().map(|p| p + Vec3::new(1.0e6, 0.0, 0.0)).collect());
    std::fs::write(dir.path().join("far.ply"), write_ply(&far, LengthUnit::M, true)).unwrap();
    let pd = descriptor("trifoliate.yaml");
    let out = phyllo(dir.path(), &["fit-report", pd.to_str().unwrap(), "far.ply"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let cd = cd_line(&text(&out.stdout));
    assert!((cd - 1.0e4).abs() < 1.0, "{cd}");
    assert!(dir.path().join("out/fit_history.jsonl").is_file());

    // A centimetre cloud read as metres is a hundred times too large.
    std::fs::write(dir.path().join("cm.xyz"), write_xyz(&sample, LengthUnit::Cm)).unwrap();
    let out = phyllo(dir.path(), &["fit-report", pd.to_str().unwrap(), "cm.xyz", "--samples", "2000"]);
    assert!(out.status.success());
    let err = text(&out.stderr);
    assert!(err.contains("warning") && err.contains("--unit m"), "{err}");
    let out = phyllo(dir.path(), &["fit-report", pd.to_str().unwrap(), "cm.xyz", "--unit", "cm", "--samples", "2000"]);
    assert!(!text(&out.stderr).contains("warning"), "{}", text(&out.stderr));
}

#[test]
fn fit_report_missing_cloud_exits_2() {
    let dir = TempDir::new().unwrap();
    let pd = descriptor("cml238.yaml");
    let out = phyllo(dir.path(), &["fit-report", pd.to_str().unwrap(), "absent.xyz"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("point cloud not found"));
}

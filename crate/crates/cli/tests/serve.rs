use std::path::{Path, PathBuf};
use std::process::Stdio;
use std::time::{Duration, Instant};

use futures::StreamExt;
use phyllo::io::{write_xyz, LengthUnit};
use phyllo::metrics::sample_model;
use phyllo::{generate_plant, parse_descriptor, resolve_parameters};
use serde_json::Value;
use tempfile::TempDir;
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::process::{Child, Command};

const RELOAD_BUDGET: Duration = Duration::from_secs(10);

fn descriptor(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../descriptors").join(name)
}

struct Server {
    _child: Child,
    base: String,
}

async fn start(dir: &Path, args: &[&str]) -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_phyllo"))
        .arg("serve")
        .args(args)
        .args(["--port", "0", "--poll-ms", "50", "--samples", "5000"])
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .kill_on_drop(true)
        .spawn()
        .expect("spawn server");
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let line = tokio::time::timeout(Duration::from_secs(30), lines.next_line())
        .await
        .expect("server announces its address")
        .unwrap()
        .expect("stdout line");
    let base = line.strip_prefix("listening on ").expect("address line").trim().to_string();
    assert!(base.starts_with("http://127.0.0.1:"), "{base}");
    Server { _child: child, base }
}

/// Minimal server-sent-events reader.
struct Events {
    stream: futures::stream::BoxStream<'static, reqwest::Result<bytes::Bytes>>,
    buffer: String,
}

impl Events {
    async fn connect(base: &str) -> Self {
        let resp = reqwest::get(format!("{base}/events")).await.unwrap();
        assert_eq!(resp.headers()["content-type"], "text/event-stream");
        Self { stream: resp.bytes_stream().boxed(), buffer: String::new() }
    }

    /// Next event other than keep-alive comments: (name, JSON data).
    async fn next(&mut self) -> (String, Value) {
        loop {
            if let Some(end) = self.buffer.find("\n\n") {
                let block: String = self.buffer.drain(..end + 2).collect();
                let mut name = String::from("message");
                let mut data = String::new();
                for line in block.lines() {
                    if let Some(v) = line.strip_prefix("event:") {
                        name = v.trim().to_string();
                    } else if let Some(v) = line.strip_prefix("data:") {
                        data.push_str(v.strip_prefix(' ').unwrap_or(v));
                    }
                }
                if !data.is_empty() {
                    return (name, serde_json::from_str(&data).unwrap());
                }
                continue;
            }
            let chunk = tokio::time::timeout(RELOAD_BUDGET, self.stream.next())
                .await
                .expect("event within the reload budget")
                .expect("stream open")
                .unwrap();
            self.buffer.push_str(&String::from_utf8_lossy(&chunk));
        }
    }
}

async fn get_json(url: String) -> (u16, Value) {
    let resp = reqwest::get(url).await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().await.unwrap())
}

async fn wait_for_model(base: &str) -> Value {
    let deadline = Instant::now() + Duration::from_secs(30);
    loop {
        let (status, body) = get_json(format!("{base}/model")).await;
        if status == 200 {
            return body;
        }
        assert!(Instant::now() < deadline, "model never became available");
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
}

fn write_self_cloud(pd_path: &Path, out: &Path) {
    let pd = resolve_parameters(&parse_descriptor(&std::fs::read_to_string(pd_path).unwrap()).unwrap()).unwrap();
    let model = generate_plant(&pd).unwrap();
    let cloud = sample_model(&model, 5000, pd.seed, 64, 16).unwrap();
    std::fs::write(out, write_xyz(&cloud, LengthUnit::M)).unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn serves_model_cloud_and_distance() {
    let dir = TempDir::new().unwrap();
    let pd = dir.path().join("plant.yaml");
    std::fs::copy(descriptor("cml238.yaml"), &pd).unwrap();
    write_self_cloud(&pd, &dir.path().join("cloud.xyz"));
    let server = start(dir.path(), &["plant.yaml", "cloud.xyz"]).await;
    let base = &server.base;

    let model = wait_for_model(base).await;
    assert_eq!(model["census"]["total"], 11);
    assert_eq!(model["organs"].as_array().unwrap().len(), 11);
    assert_eq!(model["units"], "cm");
    let positions = model["positions"].as_array().unwrap().len();
    let indices = model["indices"].as_array().unwrap();
    assert_eq!(positions % 3, 0);
    assert_eq!(indices.len() % 3, 0);
    assert!(indices.iter().all(|i| (i.as_u64().unwrap() as usize) < positions / 3));
    assert_eq!(model["normals"].as_array().unwrap().len(), positions);

    let (status, cloud) = get_json(format!("{base}/cloud")).await;
    assert_eq!(status, 200);
    assert_eq!(cloud["count"], 5000);

    // The served model samples itself with the same seed as the cloud.
    let (status, cd) = get_json(format!("{base}/cd")).await;
    assert_eq!(status, 200);
    assert!(cd["cd_m"].as_f64().unwrap() < 1e-6, "{cd}");

    let index = reqwest::get(format!("{base}/")).await.unwrap();
    assert_eq!(index.status().as_u16(), 200);
    assert!(index.text().await.unwrap().contains("/events"));
    drop(server);
}

#[tokio::test(flavor = "multi_thread")]
async fn edits_push_updates_and_broken_edits_keep_the_model() {
    let dir = TempDir::new().unwrap();
    let pd = dir.path().join("plant.yaml");
    let original = std::fs::read_to_string(descriptor("trifoliate.yaml")).unwrap();
    std::fs::write(&pd, &original).unwrap();
    let server = start(dir.path(), &["plant.yaml"]).await;
    let base = &server.base;
    let first = wait_for_model(base).await;
    let first_fp = first["fingerprint"].as_str().unwrap().to_string();

    let mut events = Events::connect(base).await;
    let (name, hello) = events.next().await;
    assert_eq!(name, "snapshot");
    assert_eq!(hello["ok"], true);
    assert_eq!(hello["fingerprint"], first_fp.as_str());
    assert_eq!(hello["mesh"]["census"]["total"], 22);
    assert!(hello["cd"].is_null());
    let generation = hello["generation"].as_u64().unwrap();

    // A valid edit: taller first node.
    assert!(original.contains("node-z: [6, 14, 23]"));
    let started = Instant::now();
    std::fs::write(&pd, original.replacen("node-z: [6, 14, 23]", "node-z: [7, 14, 23]", 1)).unwrap();
    let (name, update) = events.next().await;
    assert_eq!(name, "update");
    assert_eq!(update["ok"], true);
    assert_eq!(update["generation"].as_u64().unwrap(), generation + 1);
    assert_ne!(update["fingerprint"], first_fp.as_str());
    assert_eq!(update["mesh"]["census"]["total"], 22);
    assert!(started.elapsed() < RELOAD_BUDGET);
    let second_fp = update["fingerprint"].as_str().unwrap().to_string();

    // A broken edit: diagnostics are pushed and the last good model stays.
    std::fs::write(&pd, "node-z: [7, 14, 23]\nstem-diameter-mm: [5, 4]\n").unwrap();
    let (name, diag) = events.next().await;
    assert_eq!(name, "diagnostics");
    assert_eq!(diag["ok"], false);
    assert_eq!(diag["generation"].as_u64().unwrap(), generation + 1);
    let messages = diag["diagnostics"].to_string();
    assert!(messages.contains("stem-diameter-mm"), "{messages}");
    let kept = wait_for_model(base).await;
    assert_eq!(kept["fingerprint"], second_fp.as_str());
    let (_, status) = get_json(format!("{base}/status")).await;
    assert_eq!(status["ok"], false);

    // Fixing the file recovers.
    std::fs::write(&pd, &original).unwrap();
    let (name, fixed) = events.next().await;
    assert_eq!(name, "update");
    assert_eq!(fixed["fingerprint"], first_fp.as_str());
    assert_eq!(fixed["diagnostics"].as_array().unwrap().len(), 0);
    drop(server);
}

#[tokio::test(flavor = "multi_thread")]
async fn serve_without_cloud_and_missing_descriptor() {
    let dir = TempDir::new().unwrap();
    std::fs::copy(descriptor("ci90c.yaml"), dir.path().join("plant.yaml")).unwrap();
    let server = start(dir.path(), &["plant.yaml"]).await;
    wait_for_model(&server.base).await;
    assert_eq!(get_json(format!("{}/cloud", server.base)).await.0, 404);
    assert_eq!(get_json(format!("{}/cd", server.base)).await.0, 404);
    drop(server);

    let status = Command::new(env!("CARGO_BIN_EXE_phyllo"))
        .args(["serve", "absent.yaml", "--port", "0"])
        .current_dir(dir.path())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .await
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

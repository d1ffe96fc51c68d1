//! Live-reload service for the viewer.
//!
//! The descriptor file is polled; every content change triggers one rebuild
//! (model, mesh, Chamfer distance) on a blocking thread once the file has
//! stopped changing. Changes made while a build runs coalesce into the next
//! poll. A failed build keeps the previous model and publishes diagnostics
//! instead.
//!
//! Endpoints: `GET /model`, `GET /cloud`, `GET /cd`, `GET /status`,
//! `GET /events` (server-sent events) and static viewer assets under `/`.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::stream::{self, Stream, StreamExt};
use phyllo::io::{CloudFormat, LengthUnit, PointCloud};
use phyllo::metrics::ChamferReport;
use phyllo::{surface_census, OrganKind, PlantModel};
use serde::Serialize;
use serde_json::value::RawValue;
use tokio::net::TcpListener;
use tokio::sync::broadcast;
use tokio_stream::wrappers::BroadcastStream;
use tower_http::services::ServeDir;

use crate::pipeline::{self, FitOptions};

pub struct ServeArgs {
    pub descriptor: PathBuf,
    pub cloud: Option<PathBuf>,
    pub format: Option<CloudFormat>,
    pub unit: LengthUnit,
    pub port: u16,
    pub static_dir: Option<PathBuf>,
    pub fit: FitOptions,
    pub poll: Duration,
}

#[derive(Serialize)]
struct OrganRange {
    path: String,
    kind: &'static str,
    first_triangle: usize,
    triangle_count: usize,
}

/// Indexed triangle mesh as sent to the viewer; lengths in centimetres.
#[derive(Serialize)]
struct MeshPayload {
    fingerprint: String,
    family: &'static str,
    units: &'static str,
    census: serde_json::Map<String, serde_json::Value>,
    positions: Vec<f32>,
    normals: Vec<f32>,
    indices: Vec<u32>,
    organs: Vec<OrganRange>,
    bounds: Option<[[f64; 3]; 2]>,
}

#[derive(Serialize, Clone, Copy)]
struct CdPayload {
    cd_m: f64,
    forward_m: f64,
    backward_m: f64,
    model_samples: usize,
    cloud_points: usize,
}

impl From<ChamferReport> for CdPayload {
    fn from(r: ChamferReport) -> Self {
        Self { cd_m: r.cd, forward_m: r.forward, backward_m: r.backward, model_samples: r.count_a, cloud_points: r.count_b }
    }
}

#[derive(Serialize)]
struct CloudPayload<'a> {
    units: &'static str,
    count: usize,
    positions: Vec<f32>,
    colors: Option<&'a [[u8; 3]]>,
}

#[derive(Default)]
struct Snapshot {
    /// Incremented on every successful build.
    generation: u64,
    fingerprint: Option<String>,
    mesh: Option<Arc<RawValue>>,
    cd: Option<CdPayload>,
    /// Lint warnings of the current model, or the errors of the last failed build.
    diagnostics: Vec<String>,
    ok: bool,
}

struct Shared {
    snapshot: RwLock<Snapshot>,
    cloud: Option<Arc<RawValue>>,
    events: broadcast::Sender<(&'static str, Arc<str>)>,
}

#[derive(Serialize)]
struct UpdateEvent<'a> {
    generation: u64,
    ok: bool,
    fingerprint: Option<&'a str>,
    mesh: Option<&'a RawValue>,
    cloud: Option<&'a RawValue>,
    cd: Option<CdPayload>,
    diagnostics: &'a [String],
}

impl Shared {
    fn update_json(&self, include_mesh: bool) -> String {
        let s = self.snapshot.read().expect("snapshot lock");
        let event = UpdateEvent {
            generation: s.generation,
            ok: s.ok,
            fingerprint: s.fingerprint.as_deref(),
            mesh: if include_mesh { s.mesh.as_deref() } else { None },
            cloud: if include_mesh { self.cloud.as_deref() } else { None },
            cd: s.cd,
            diagnostics: &s.diagnostics,
        };
        serde_json::to_string(&event).expect("serialisable event")
    }

    fn publish(&self, name: &'static str, include_mesh: bool) {
        // No receivers is fine: the build is still logged.
        let _ = self.events.send((name, self.update_json(include_mesh).into()));
    }
}

struct Built {
    fingerprint: String,
    mesh: Arc<RawValue>,
    cd: Option<CdPayload>,
    warnings: Vec<String>,
    summary: String,
}

fn flatten(points: impl Iterator<Item = phyllo::Vec3>) -> Vec<f32> {
    points.flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect()
}

fn mesh_payload(model: &PlantModel, sample_u: usize, sample_v: usize) -> Result<MeshPayload> {
    let (mesh, ranges) = model.tessellate(sample_u, sample_v)?;
    let census = surface_census(&model.organs);
    let mut normals = vec![phyllo::Vec3::zeros(); mesh.vertices.len()];
    for (tri, n) in mesh.triangles.iter().zip(&mesh.normals) {
        for &i in tri {
            normals[i as usize] += n;
        }
    }
    Ok(MeshPayload {
        fingerprint: model.fingerprint.clone(),
        family: model.family.as_str(),
        units: "cm",
        census: OrganKind::ALL
            .iter()
            .map(|k| (k.as_str().to_string(), census.get(*k).into()))
            .chain([("total".to_string(), census.total().into())])
            .collect(),
        positions: flatten(mesh.vertices.iter().copied()),
        normals: flatten(normals.iter().map(|n| n.try_normalize(0.0).unwrap_or_else(phyllo::Vec3::z))),
        indices: mesh.triangles.iter().flatten().copied().collect(),
        organs: model
            .organs
            .iter()
            .zip(ranges)
            .map(|(o, r)| OrganRange {
                path: o.path.clone(),
                kind: o.kind.as_str(),
                first_triangle: r.start,
                triangle_count: r.len(),
            })
            .collect(),
        bounds: model.bounding_box().map(|(lo, hi)| [lo.into(), hi.into()]),
    })
}

fn build(text: &str, name: &str, cloud: Option<&PointCloud>, opts: FitOptions) -> Result<Built> {
    let pd = pipeline::descriptor_from_text(text, name)?;
    let (model, warnings) = pipeline::build_model(&pd)?;
    let payload = mesh_payload(&model, opts.sample_u, opts.sample_v)?;
    let mesh: Arc<RawValue> = RawValue::from_string(serde_json::to_string(&payload)?)?.into();
    let cd = cloud.map(|c| pipeline::fit(&pd, &model, c, opts)).transpose()?.map(CdPayload::from);
    let summary = format!(
        "{}, {} triangles{}",
        surface_census(&model.organs),
        payload.indices.len() / 3,
        cd.map(|c| format!(", CD {:.6} m", c.cd_m)).unwrap_or_default()
    );
    Ok(Built { fingerprint: model.fingerprint, mesh, cd, warnings, summary })
}

fn error_chain(e: &anyhow::Error) -> Vec<String> {
    e.chain().map(ToString::to_string).collect()
}

async fn rebuild(shared: &Shared, args: &Arc<ServeArgs>, cloud: &Option<Arc<PointCloud>>, text: String) {
    let started = Instant::now();
    let name = args.descriptor.display().to_string();
    let (cloud, opts) = (cloud.clone(), args.fit);
    let result = tokio::task::spawn_blocking(move || build(&text, &name, cloud.as_deref(), opts))
        .await
        .map_err(anyhow::Error::from)
        .and_then(|r| r);
    let receivers = shared.events.receiver_count();
    match result {
        Ok(built) => {
            let generation = {
                let mut s = shared.snapshot.write().expect("snapshot lock");
                s.generation += 1;
                s.fingerprint = Some(built.fingerprint);
                s.mesh = Some(built.mesh);
                s.cd = built.cd;
                s.diagnostics = built.warnings;
                s.ok = true;
                s.generation
            };
            tracing::info!(
                generation,
                clients = receivers,
                elapsed_ms = started.elapsed().as_millis() as u64,
                "rebuilt: {}",
                built.summary
            );
            shared.publish("update", true);
        }
        Err(e) => {
            let diagnostics = error_chain(&e);
            tracing::warn!(clients = receivers, "build failed, keeping previous model: {}", diagnostics.join(": "));
            {
                let mut s = shared.snapshot.write().expect("snapshot lock");
                s.diagnostics = diagnostics;
                s.ok = false;
            }
            shared.publish("diagnostics", false);
        }
    }
}

async fn watch(shared: Arc<Shared>, args: Arc<ServeArgs>, cloud: Option<Arc<PointCloud>>) {
    let mut built: Option<Vec<u8>> = None;
    let mut pending: Option<Vec<u8>> = None;
    let mut read_error: Option<String> = None;
    loop {
        match tokio::fs::read(&args.descriptor).await {
            Ok(bytes) if built.as_ref() != Some(&bytes) => {
                read_error = None;
                // Build once the content is unchanged across two polls, so a
                // save caught half-written is not reported as an error.
                if pending.as_ref() == Some(&bytes) {
                    let text = String::from_utf8_lossy(&bytes).into_owned();
                    built = pending.take();
                    rebuild(&shared, &args, &cloud, text).await;
                } else {
                    pending = Some(bytes);
                    tokio::time::sleep(args.poll.min(Duration::from_millis(50))).await;
                    continue;
                }
            }
            Ok(_) => pending = None,
            Err(e) => {
                let msg = format!("cannot read {}: {e}", args.descriptor.display());
                if read_error.as_ref() != Some(&msg) {
                    tracing::warn!("{msg}");
                    {
                        let mut s = shared.snapshot.write().expect("snapshot lock");
                        s.diagnostics = vec![msg.clone()];
                        s.ok = false;
                    }
                    shared.publish("diagnostics", false);
                    read_error = Some(msg);
                    built = None;
                    pending = None;
                }
            }
        }
        tokio::time::sleep(args.poll).await;
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn json_error(status: StatusCode, message: &str) -> Response {
    json_response(status, serde_json::json!({ "error": message }).to_string())
}

async fn get_model(State(shared): State<Arc<Shared>>) -> Response {
    let mesh = shared.snapshot.read().expect("snapshot lock").mesh.clone();
    match mesh {
        Some(m) => json_response(StatusCode::OK, m.get().to_string()),
        None => json_error(StatusCode::SERVICE_UNAVAILABLE, "no model has been built yet"),
    }
}

async fn get_cloud(State(shared): State<Arc<Shared>>) -> Response {
    match &shared.cloud {
        Some(c) => json_response(StatusCode::OK, c.get().to_string()),
        None => json_error(StatusCode::NOT_FOUND, "no point cloud loaded"),
    }
}

async fn get_cd(State(shared): State<Arc<Shared>>) -> Response {
    if shared.cloud.is_none() {
        return json_error(StatusCode::NOT_FOUND, "no point cloud loaded");
    }
    let cd = shared.snapshot.read().expect("snapshot lock").cd;
    match cd {
        Some(cd) => json_response(StatusCode::OK, serde_json::to_string(&cd).expect("serialisable")),
        None => json_error(StatusCode::SERVICE_UNAVAILABLE, "no model has been built yet"),
    }
}

async fn get_status(State(shared): State<Arc<Shared>>) -> Response {
    json_response(StatusCode::OK, shared.update_json(false))
}

async fn events(State(shared): State<Arc<Shared>>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = shared.events.subscribe();
    let hello = Event::default().event("snapshot").data(shared.update_json(true));
    let updates = BroadcastStream::new(rx).filter_map(|msg| async move {
        // A lagging client skips to the newest state.
        msg.ok().map(|(name, data)| Ok(Event::default().event(name).data(&*data)))
    });
    Sse::new(stream::once(async move { Ok(hello) }).chain(updates)).keep_alive(KeepAlive::default())
}

const PLACEHOLDER: &str = "<!doctype html><title>phyllo</title><h1>phyllo server</h1>\
<p>No viewer assets configured. Endpoints: <a href=\"/model\">/model</a>, <a href=\"/cloud\">/cloud</a>, \
<a href=\"/cd\">/cd</a>, <a href=\"/status\">/status</a>, /events.</p>";

fn cloud_payload(cloud: &PointCloud) -> Result<Arc<RawValue>> {
    let payload = CloudPayload {
        units: "cm",
        count: cloud.len(),
        positions: flatten(cloud.points.iter().copied()),
        colors: cloud.colors.as_deref(),
    };
    Ok(RawValue::from_string(serde_json::to_string(&payload)?)?.into())
}

fn router(shared: Arc<Shared>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/model", get(get_model))
        .route("/cloud", get(get_cloud))
        .route("/cd", get(get_cd))
        .route("/status", get(get_status))
        .route("/events", get(events))
        .with_state(shared);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    }
}

pub async fn serve(args: ServeArgs) -> Result<()> {
    // Validate inputs up front; a descriptor that exists but fails to build
    // still starts the server so the user can fix it live.
    pipeline::read_input(&args.descriptor, "descriptor")?;
    let cloud = match &args.cloud {
        Some(path) => Some(Arc::new(pipeline::load_cloud(path, args.format, args.unit)?)),
        None => None,
    };
    let static_dir = match &args.static_dir {
        Some(dir) if dir.is_dir() => Some(dir.clone()),
        Some(dir) => {
            tracing::warn!("viewer directory {} not found; serving a placeholder page", dir.display());
            None
        }
        None => None,
    };
    let (events, _) = broadcast::channel(16);
    let shared = Arc::new(Shared {
        snapshot: RwLock::new(Snapshot::default()),
        cloud: cloud.as_deref().map(cloud_payload).transpose()?,
        events,
    });

    let listener = TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], args.port)))
        .await
        .with_context(|| format!("binding 127.0.0.1:{}", args.port))?;
    let addr = listener.local_addr()?;
    println!("listening on http://{addr}");
    use std::io::Write as _;
    std::io::stdout().flush()?;

    let args = Arc::new(args);
    tokio::spawn(watch(shared.clone(), args.clone(), cloud));
    axum::serve(listener, router(shared, static_dir)).await.context("server failed")
}

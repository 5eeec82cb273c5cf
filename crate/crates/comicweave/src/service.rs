//! Session-oriented JSON/HTTP API.
//!
//! | method | path                                  | success | errors        |
//! |--------|---------------------------------------|---------|---------------|
//! | GET    | `/health`                             | 200     |               |
//! | POST   | `/sessions` `{length, seed?}`         | 201     | 400           |
//! | GET    | `/sessions`                           | 200     |               |
//! | GET    | `/sessions/{id}/document`             | 200     | 404           |
//! | POST   | `/sessions/{id}/layers/apply`         | 200     | 400, 404, 422 |
//! | PATCH  | `/sessions/{id}/nodes/{node}`         | 200     | 400, 404, 422 |
//! | POST   | `/sessions/{id}/render`               | 200     | 404           |
//! | GET    | `/files/{session}/{revision}/{file}`  | 200     | 404           |
//! | GET    | `/layers`                             | 200     |               |
//! | POST   | `/layers` (declarative layer JSON)    | 201     | 400, 409      |
//! | GET    | `/models`                             | 200     |               |
//! | GET    | `/assets`                             | 200     |               |
//! | POST   | `/assets/sets/{name}` (multipart)     | 201     | 400, 415      |
//! | GET    | `/assets/sets/{name}/{label}`         | 200     | 404           |
//!
//! Error bodies are `{"error": message}`. Requests on one session are
//! serialized; different sessions run in parallel.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use comicweave_core::assets::AssetPool;
use comicweave_core::layers::DeclarativeLayer;
use comicweave_core::model::Value;
use comicweave_core::render::{render_sequence, StripLayout};
use comicweave_core::{Generator, LayerError, ModelError, NodeId, SceneDocument, SequenceModel};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as JsonValue};
use thiserror::Error;
use tokio::sync::Mutex;

use crate::assets_io::{self, AssetIoError};
use crate::codec;
use crate::config::{Config, ConfigError};
use crate::output::{self, DOCUMENT_FILE};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An HTTP error: status plus message.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn internal(message: impl ToString) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::UnknownNode(_) | ModelError::UnknownParent(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub sequence: SequenceModel,
    pub created: u64,
    pub modified: u64,
}

#[derive(Serialize, Deserialize)]
struct SessionRecord {
    id: String,
    created: u64,
    modified: u64,
    document: SceneDocument,
}

/// What is written on shutdown and read back on start.
#[derive(Serialize, Deserialize, Default)]
struct Snapshot {
    sessions: Vec<SessionRecord>,
    #[serde(default)]
    layers: Vec<DeclarativeLayer>,
}

pub struct AppState {
    config: Config,
    generator: RwLock<Generator>,
    assets: RwLock<AssetPool>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    /// Declarative layers added over HTTP, kept for the snapshot.
    user_layers: RwLock<Vec<DeclarativeLayer>>,
    output_dir: PathBuf,
}

impl AppState {
    /// Builds the generator, models and asset pool from `config`.
    pub fn from_config(config: Config) -> Result<Self, ServiceError> {
        let generator = config.generator()?;
        let assets = config.asset_pool()?;
        Ok(Self::new(config, generator, assets))
    }

    pub fn new(config: Config, generator: Generator, assets: AssetPool) -> Self {
        let output_dir = config.output.dir.clone();
        AppState {
            config,
            generator: RwLock::new(generator),
            assets: RwLock::new(assets),
            sessions: RwLock::new(HashMap::new()),
            user_layers: RwLock::new(Vec::new()),
            output_dir,
        }
    }

    pub fn layout(&self) -> StripLayout {
        self.config.layout
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session `{id}`")))
    }

    fn insert_session(&self, session: Session) {
        self.sessions
            .write()
            .expect("session map lock")
            .insert(session.id.clone(), Arc::new(Mutex::new(session)));
    }

    fn asset_snapshot(&self) -> AssetPool {
        self.assets.read().expect("asset lock").clone()
    }

    /// Copies entries that a pipeline run added or changed into the shared
    /// pool. Entries untouched by the run are left alone so concurrent
    /// uploads are not lost.
    fn merge_assets(&self, before: &AssetPool, after: &AssetPool) {
        let mut shared = self.assets.write().expect("asset lock");
        for set in after.set_names() {
            shared.ensure_set(&set);
            for label in after.labels(&set) {
                let entry = after.get(&set, &label).expect("listed label");
                if before.get(&set, &label) != Some(entry) {
                    shared.insert(&set, &label, entry.clone());
                }
            }
        }
    }

    /// Reads sessions and user layers written by [`AppState::save_snapshot`].
    pub fn load_snapshot(&self, path: &FsPath) -> Result<usize, ServiceError> {
        let err = |reason: String| ServiceError::Snapshot {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let snap: Snapshot = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        {
            let mut generator = self.generator.write().expect("generator lock");
            for layer in &snap.layers {
                generator
                    .layers
                    .register(Box::new(layer.clone()))
                    .map_err(|e| err(e.to_string()))?;
            }
        }
        *self.user_layers.write().expect("layer lock") = snap.layers;
        let count = snap.sessions.len();
        for r in snap.sessions {
            let sequence =
                SequenceModel::from_document(&r.document).map_err(|e| err(e.to_string()))?;
            self.insert_session(Session {
                id: r.id,
                sequence,
                created: r.created,
                modified: r.modified,
            });
        }
        Ok(count)
    }

    pub async fn save_snapshot(&self, path: &FsPath) -> Result<usize, ServiceError> {
        let handles: Vec<_> = self
            .sessions
            .read()
            .expect("session map lock")
            .values()
            .cloned()
            .collect();
        let mut sessions = Vec::with_capacity(handles.len());
        for h in handles {
            let s = h.lock().await;
            sessions.push(SessionRecord {
                id: s.id.clone(),
                created: s.created,
                modified: s.modified,
                document: s.sequence.to_document(),
            });
        }
        sessions.sort_by(|a, b| a.id.cmp(&b.id));
        let count = sessions.len();
        let snap = Snapshot {
            sessions,
            layers: self.user_layers.read().expect("layer lock").clone(),
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(
            path,
            serde_json::to_string_pretty(&snap).expect("snapshot serializes"),
        )?;
        Ok(count)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/document", get(get_document))
        .route("/sessions/{id}/layers/apply", post(apply_layers))
        .route("/sessions/{id}/nodes/{node}", patch(patch_node))
        .route("/sessions/{id}/render", post(render))
        .route("/files/{session}/{revision}/{file}", get(get_file))
        .route("/layers", get(list_layers).post(register_layer))
        .route("/models", get(list_models))
        .route("/assets", get(list_assets))
        .route("/assets/sets/{name}", post(upload_assets))
        .route("/assets/sets/{name}/{label}", get(get_asset))
        .with_state(state)
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let body: &[u8] = if body.is_empty() { b"{}" } else { body };
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn document_reply(seq: &SequenceModel) -> Json<JsonValue> {
    Json(json!({ "document": seq.to_document(), "revision": seq.revision() }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    length: i64,
    #[serde(default)]
    seed: u64,
}

/// Upper bound on panels per session; keeps a typo from allocating gigabytes.
pub const MAX_LENGTH: i64 = 256;

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: CreateSession = parse_body(&body)?;
    if !(0..=MAX_LENGTH).contains(&req.length) {
        return Err(ApiError::bad_request(format!(
            "length must be in 0..={MAX_LENGTH}"
        )));
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let sequence = SequenceModel::new(req.length as usize, req.seed);
    let t = now();
    let reply = json!({ "session_id": id, "document": sequence.to_document(), "revision": sequence.revision() });
    state.insert_session(Session {
        id,
        sequence,
        created: t,
        modified: t,
    });
    Ok((StatusCode::CREATED, Json(reply)).into_response())
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<JsonValue> {
    let handles: Vec<_> = state
        .sessions
        .read()
        .expect("session map lock")
        .values()
        .cloned()
        .collect();
    let mut out = Vec::new();
    for h in handles {
        let s = h.lock().await;
        out.push(json!({
            "session_id": s.id,
            "revision": s.sequence.revision(),
            "length": s.sequence.len(),
            "created": s.created,
            "modified": s.modified,
        }));
    }
    out.sort_by(|a, b| a["session_id"].as_str().cmp(&b["session_id"].as_str()));
    Json(JsonValue::Array(out))
}

async fn get_document(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<SceneDocument>> {
    let session = state.session(&id)?;
    let s = session.lock().await;
    Ok(Json(s.sequence.to_document()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyRequest {
    layers: Vec<String>,
    #[serde(default)]
    params: BTreeMap<String, JsonValue>,
    /// Defaults to the session's seed.
    seed: Option<u64>,
}

async fn apply_layers(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<JsonValue>> {
    let req: ApplyRequest = parse_body(&body)?;
    let session = state.session(&id)?;
    let mut s = session.lock().await;
    let seed = req.seed.unwrap_or(s.sequence.seed());
    let params = state.config.layer_params(&req.params);
    let before = state.asset_snapshot();
    let mut pool = before.clone();
    let mut work = s.sequence.clone();
    let worker = state.clone();
    let (work, pool) = tokio::task::spawn_blocking(move || {
        let names: Vec<&str> = req.layers.iter().map(String::as_str).collect();
        let generator = worker.generator.read().expect("generator lock");
        generator
            .apply_layers(&mut work, &names, seed, &mut pool, &params)
            .map(|()| (work, pool))
    })
    .await
    .map_err(ApiError::internal)?
    .map_err(|e| {
        let status = match e {
            LayerError::UnknownLayer(_)
            | LayerError::LayerFailure { .. }
            | LayerError::InvalidParam { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    })?;
    state.merge_assets(&before, &pool);
    if work.revision() != s.sequence.revision() {
        s.modified = now();
    }
    s.sequence = work;
    Ok(document_reply(&s.sequence))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatchRequest {
    property: String,
    value: Value,
}

async fn patch_node(
    State(state): State<Arc<AppState>>,
    Path((id, node)): Path<(String, u64)>,
    body: Bytes,
) -> ApiResult<Json<JsonValue>> {
    let session = state.session(&id)?;
    let req: PatchRequest = parse_body(&body)?;
    let mut s = session.lock().await;
    s.sequence
        .update_node(NodeId(node), &req.property, req.value)?;
    s.modified = now();
    Ok(document_reply(&s.sequence))
}

async fn render(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<JsonValue>> {
    let session = state.session(&id)?;
    let s = session.lock().await;
    let revision = s.sequence.revision();
    let n = s.sequence.len();
    let dir = state.output_dir.join(&id).join(revision.to_string());
    // A revision renders once; later calls reuse its files.
    if !dir.join(DOCUMENT_FILE).exists() {
        let seq = s.sequence.clone();
        let pool = state.asset_snapshot();
        let layout = state.layout();
        let target = dir.clone();
        tokio::task::spawn_blocking(move || {
            output::write_render_atomic(&render_sequence(&seq, &pool, &layout), &target)
        })
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?;
    }
    let base = format!("/files/{id}/{revision}");
    let panel_urls: Vec<String> = (0..n)
        .map(|k| format!("{base}/{}", output::panel_file(k)))
        .collect();
    let strip_url = (n > 0).then(|| format!("{base}/{}", output::STRIP_FILE));
    Ok(Json(json!({
        "revision": revision,
        "strip_url": strip_url,
        "panel_urls": panel_urls,
        "document_url": format!("{base}/{DOCUMENT_FILE}"),
        "document": s.sequence.to_document(),
    })))
}

fn safe_segment(s: &str) -> bool {
    !s.is_empty() && s != "." && s != ".." && !s.contains(['/', '\\'])
}

async fn get_file(
    State(state): State<Arc<AppState>>,
    Path((session, revision, file)): Path<(String, String, String)>,
) -> ApiResult<Response> {
    if ![&session, &revision, &file].iter().all(|s| safe_segment(s)) {
        return Err(ApiError::not_found("no such file"));
    }
    let path = state.output_dir.join(&session).join(&revision).join(&file);
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::not_found("no such file"))?;
    let mime = if file.ends_with(".png") {
        "image/png"
    } else {
        "application/json"
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

async fn list_layers(State(state): State<Arc<AppState>>) -> Json<JsonValue> {
    let generator = state.generator.read().expect("generator lock");
    let layers: Vec<JsonValue> = generator
        .layers
        .describe()
        .into_iter()
        .map(|(name, description)| json!({ "name": name, "description": description }))
        .collect();
    Json(JsonValue::Array(layers))
}

async fn register_layer(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let layer =
        DeclarativeLayer::from_json(text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let name = layer.name.clone();
    state
        .generator
        .write()
        .expect("generator lock")
        .layers
        .register(Box::new(layer.clone()))
        .map_err(|e| ApiError::new(StatusCode::CONFLICT, e.to_string()))?;
    state.user_layers.write().expect("layer lock").push(layer);
    Ok((StatusCode::CREATED, Json(json!({ "name": name }))).into_response())
}

async fn list_models(State(state): State<Arc<AppState>>) -> Json<JsonValue> {
    let generator = state.generator.read().expect("generator lock");
    let models: Vec<JsonValue> = generator
        .models
        .list()
        .into_iter()
        .map(|(name, kind)| json!({ "name": name, "kind": kind }))
        .collect();
    Json(JsonValue::Array(models))
}

async fn list_assets(State(state): State<Arc<AppState>>) -> Json<BTreeMap<String, Vec<String>>> {
    let pool = state.assets.read().expect("asset lock");
    Json(
        pool.set_names()
            .into_iter()
            .map(|s| (s.clone(), pool.labels(&s)))
            .collect(),
    )
}

async fn get_asset(
    State(state): State<Arc<AppState>>,
    Path((name, label)): Path<(String, String)>,
) -> ApiResult<Response> {
    let label = label.strip_suffix(".png").unwrap_or(&label).to_string();
    let image = {
        let pool = state.assets.read().expect("asset lock");
        pool.get(&name, &label)
            .map(|e| e.image.clone())
            .ok_or_else(|| ApiError::not_found("no such asset"))?
    };
    let png = codec::encode_png(&image).map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

/// Each file part becomes one entry labelled by its file name's stem. All
/// parts must decode or nothing is added.
async fn upload_assets(
    State(state): State<Arc<AppState>>,
    Path(name): Path<String>,
    mut multipart: Multipart,
) -> ApiResult<Response> {
    let set = comicweave_core::assets::normalize_label(&name);
    if !safe_segment(&set) {
        return Err(ApiError::bad_request("invalid set name"));
    }
    let staging = tempfile::tempdir().map_err(ApiError::internal)?;
    let mut files = Vec::new();
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request(e.to_string()))?
    {
        let raw = field
            .file_name()
            .or(field.name())
            .unwrap_or("upload")
            .to_string();
        let file_name = FsPath::new(&raw)
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        if !safe_segment(&file_name) {
            return Err(ApiError::bad_request(format!("invalid file name `{raw}`")));
        }
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let path = staging.path().join(&file_name);
        std::fs::write(&path, &bytes).map_err(ApiError::internal)?;
        files.push(path);
    }
    if files.is_empty() {
        return Err(ApiError::bad_request("no files in upload"));
    }
    let mut pool = state.asset_snapshot();
    let mut added = 0;
    let mut overwritten = Vec::new();
    for path in &files {
        match assets_io::add_visuals(&mut pool, &set, path) {
            Ok(report) => {
                added += report.added;
                overwritten.extend(report.overwritten);
            }
            Err(AssetIoError::UnsupportedFormat(p)) => {
                let shown = p
                    .file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default();
                return Err(ApiError::new(
                    StatusCode::UNSUPPORTED_MEDIA_TYPE,
                    format!("`{shown}` is not a PNG or JPEG image"),
                ));
            }
            Err(e) => return Err(ApiError::internal(e)),
        }
    }
    let labels = pool.labels(&set);
    {
        let mut shared = state.assets.write().expect("asset lock");
        for label in &labels {
            if let Some(entry) = pool.get(&set, label) {
                if shared.get(&set, label) != Some(entry) {
                    shared.insert(&set, label, entry.clone());
                }
            }
        }
        shared.ensure_set(&set);
    }
    let reply = json!({ "set": set, "added": added, "overwritten": overwritten, "labels": labels });
    Ok((StatusCode::CREATED, Json(reply)).into_response())
}

/// Binds, serves until Ctrl-C, then writes the snapshot if one is configured.
pub async fn serve(config: Config) -> Result<(), ServiceError> {
    let addr = format!("{}:{}", config.server.host, config.server.port);
    let snapshot = config.server.snapshot.clone();
    let state = Arc::new(AppState::from_config(config)?);
    if let Some(path) = snapshot.as_deref().filter(|p| p.exists()) {
        let n = state.load_snapshot(path)?;
        tracing::info!(sessions = n, path = %path.display(), "restored snapshot");
    }
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: addr.clone(),
            source,
        })?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Some(path) = snapshot {
        let n = state.save_snapshot(&path).await?;
        tracing::info!(sessions = n, path = %path.display(), "wrote snapshot");
    }
    Ok(())
}

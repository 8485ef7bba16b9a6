//! Loopback-only HTTP API over the store, the timeline, and the recorder.
//!
//! | method | path                         | body / query                 |
//! |--------|------------------------------|------------------------------|
//! | GET    | `/dates`                     |                              |
//! | GET    | `/timeline/{date}`           |                              |
//! | GET    | `/frame/{date}/{index}/image`| JPEG bytes                   |
//! | GET    | `/frame/{date}/{index}/meta` |                              |
//! | POST   | `/open`                      | `{frame_id, variant}`        |
//! | GET/PUT| `/config`                    | capture config               |
//! | GET    | `/estimate`                  | `?hours=H`                   |
//! | POST   | `/gc`                        |                              |
//! | GET    | `/stats`                     |                              |
//! | POST   | `/record/start`, `/record/stop` |                           |
//! | GET    | `/record/status`             |                              |
//! | POST   | `/categories/reload`         |                              |
//!
//! Every JSON body carries `schema_version`; every response carries an
//! `x-schema-version` header.

use std::future::Future;
use std::io;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{Local, NaiveDate};
use lapse_core::retrieval::{Dispatcher, RetrievalError};
use lapse_core::store::{GcError, StoreError};
use lapse_core::timeline::{FrameId, FrameView};
use lapse_core::{
    derive_action, derive_folder_action, estimate_disk, open_timeline, validate_config, CaptureConfig, FrameRecord,
    FrameStore, Launcher, RetentionPolicy, RetrievalAction, SharedCategoryMap,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::net::TcpListener;

use crate::recorder::{CaptureBackend, Recorder};
use crate::settings;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_BIND: &str = "127.0.0.1:7878";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub storage_root: PathBuf,
    pub read_only: bool,
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("refusing to listen on {0}: only loopback addresses are allowed")]
    BindRefusedNonLoopback(String),
    #[error("port {0} is already in use")]
    PortInUse(SocketAddr),
    #[error("cannot resolve bind address {0:?}")]
    BadAddress(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Resolves `addr` and refuses it unless every resolved address is loopback.
pub fn resolve_bind(addr: &str) -> Result<SocketAddr, ServeError> {
    let resolved: Vec<SocketAddr> = addr
        .to_socket_addrs()
        .map_err(|_| ServeError::BadAddress(addr.to_owned()))?
        .collect();
    let first = *resolved.first().ok_or_else(|| ServeError::BadAddress(addr.to_owned()))?;
    if resolved.iter().any(|a| !a.ip().is_loopback()) {
        return Err(ServeError::BindRefusedNonLoopback(addr.to_owned()));
    }
    Ok(first)
}

/// Binds a listener, refusing anything but loopback.
pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    if !addr.ip().is_loopback() {
        return Err(ServeError::BindRefusedNonLoopback(addr.to_string()));
    }
    TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        io::ErrorKind::AddrInUse => ServeError::PortInUse(addr),
        _ => ServeError::Io(e),
    })
}

pub struct AppState {
    pub store: Arc<FrameStore>,
    config: RwLock<CaptureConfig>,
    pub categories: Arc<SharedCategoryMap>,
    dispatcher: Arc<Dispatcher<Arc<dyn Launcher>>>,
    pub recorder: Recorder,
    /// Serializes mutating requests.
    commands: tokio::sync::Mutex<()>,
    read_only: bool,
}

impl AppState {
    pub fn new(
        store: Arc<FrameStore>,
        config: CaptureConfig,
        categories: Arc<SharedCategoryMap>,
        launcher: Arc<dyn Launcher>,
        backend: Arc<dyn CaptureBackend>,
        read_only: bool,
    ) -> Self {
        Self {
            store,
            config: RwLock::new(config),
            categories,
            dispatcher: Arc::new(Dispatcher::new(launcher)),
            recorder: Recorder::new(backend),
            commands: tokio::sync::Mutex::new(()),
            read_only,
        }
    }

    pub fn config(&self) -> CaptureConfig {
        self.config.read().unwrap().clone()
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/dates", get(get_dates))
        .route("/timeline/{date}", get(get_timeline))
        .route("/frame/{date}/{index}/image", get(get_frame_image))
        .route("/frame/{date}/{index}/meta", get(get_frame_meta))
        .route("/open", post(post_open))
        .route("/config", get(get_config).put(put_config))
        .route("/estimate", get(get_estimate))
        .route("/gc", post(post_gc))
        .route("/stats", get(get_stats))
        .route("/record/start", post(post_record_start))
        .route("/record/stop", post(post_record_stop))
        .route("/record/status", get(get_record_status))
        .route("/categories/reload", post(post_categories_reload))
        .layer(axum::middleware::map_response(stamp_schema))
        .with_state(state)
}

async fn stamp_schema(mut res: Response) -> Response {
    res.headers_mut()
        .insert("x-schema-version", HeaderValue::from(SCHEMA_VERSION));
    res
}

/// Serves `router(state)` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: Shared,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Runs GC now and again whenever the local date changes.
pub fn spawn_daily_gc(state: Shared) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut last_run: Option<NaiveDate> = None;
        loop {
            let today = Local::now().date_naive();
            if last_run != Some(today) {
                match run_gc(Arc::clone(&state), today).await {
                    Ok(report) => tracing::info!(?report, "scheduled gc"),
                    Err(e) => tracing::warn!("scheduled gc: {}", e.message),
                }
                last_run = Some(today);
            }
            tokio::time::sleep(Duration::from_secs(600)).await;
        }
    })
}

#[derive(Serialize)]
struct Envelope<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

fn ok<T: Serialize>(body: T) -> Response {
    Json(Envelope {
        schema_version: SCHEMA_VERSION,
        body,
    })
    .into_response()
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    details: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn read_only() -> Self {
        Self::new(StatusCode::FORBIDDEN, "read_only", "service is read-only")
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(details) = self.details {
            error["details"] = details;
        }
        (
            self.status,
            Json(json!({ "schema_version": SCHEMA_VERSION, "error": error })),
        )
            .into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::MissingBlob(_) | StoreError::NoSuchDay(_) => ApiError::not_found(e.to_string()),
            StoreError::CorruptJournal { .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "corrupt_journal", e.to_string()),
            other => ApiError::internal(other.to_string()),
        }
    }
}

type ApiResult = Result<Response, ApiError>;

fn parse_date(s: &str) -> Result<NaiveDate, ApiError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| ApiError::bad_request(format!("bad date {s:?}; expected YYYY-MM-DD")))
}

fn lookup(store: &FrameStore, id: FrameId) -> Result<FrameRecord, ApiError> {
    let segment = store.read_day(id.date)?;
    segment
        .records
        .into_iter()
        .nth(id.index)
        .ok_or_else(|| ApiError::not_found(format!("no frame {id}")))
}

fn frame_id(date: &str, index: &str) -> Result<FrameId, ApiError> {
    let date = parse_date(date)?;
    let index = index
        .parse()
        .map_err(|_| ApiError::bad_request(format!("bad frame index {index:?}")))?;
    Ok(FrameId { date, index })
}

async fn get_dates(State(state): State<Shared>) -> ApiResult {
    let dates = state.store.list_dates()?;
    Ok(ok(json!({ "dates": dates })))
}

async fn get_timeline(State(state): State<Shared>, Path(date): Path<String>) -> ApiResult {
    let date = parse_date(&date)?;
    let (timeline, cursor) = open_timeline(&state.store, date)?;
    Ok(ok(json!({
        "date": date,
        "length": timeline.len(),
        "cursor": cursor,
        "frames": timeline.frames(),
    })))
}

async fn get_frame_image(State(state): State<Shared>, Path((date, index)): Path<(String, String)>) -> ApiResult {
    let record = lookup(&state.store, frame_id(&date, &index)?)?;
    let bytes = state.store.read_blob(&record.blob)?;
    Ok(([(header::CONTENT_TYPE, "image/jpeg")], bytes).into_response())
}

#[derive(Serialize)]
struct FrameMetaBody {
    frame_id: FrameId,
    record: FrameRecord,
    view: FrameView,
    actions: Actions,
}

#[derive(Serialize)]
struct Actions {
    default: RetrievalAction,
    folder: Option<RetrievalAction>,
}

async fn get_frame_meta(State(state): State<Shared>, Path((date, index)): Path<(String, String)>) -> ApiResult {
    let id = frame_id(&date, &index)?;
    let record = lookup(&state.store, id)?;
    Ok(ok(FrameMetaBody {
        frame_id: id,
        view: FrameView::from(&record),
        actions: Actions {
            default: derive_action(&record),
            folder: derive_folder_action(&record).ok(),
        },
        record,
    }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenVariant {
    #[default]
    Default,
    Folder,
}

#[derive(Debug, Deserialize)]
pub struct OpenRequest {
    pub frame_id: String,
    #[serde(default)]
    pub variant: OpenVariant,
}

async fn post_open(State(state): State<Shared>, Json(req): Json<OpenRequest>) -> ApiResult {
    let _serial = state.commands.lock().await;
    let id: FrameId = req
        .frame_id
        .parse()
        .map_err(|_| ApiError::not_found(format!("no frame {:?}", req.frame_id)))?;
    let record = lookup(&state.store, id)?;
    let action = match req.variant {
        OpenVariant::Default => derive_action(&record),
        OpenVariant::Folder => derive_folder_action(&record).map_err(retrieval_error)?,
    };
    let dispatcher = Arc::clone(&state.dispatcher);
    let to_run = action.clone();
    tokio::task::spawn_blocking(move || dispatcher.execute(&to_run))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(retrieval_error)?;
    Ok(ok(json!({ "frame_id": id, "action": action, "status": "ok" })))
}

fn retrieval_error(e: RetrievalError) -> ApiError {
    match &e {
        RetrievalError::OpenTargetMissing(target) => {
            ApiError::new(StatusCode::GONE, "open_target_missing", e.to_string())
                .with_details(json!({ "target": target }))
        }
        RetrievalError::NotApplicable(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "not_applicable", e.to_string()),
        RetrievalError::Malformed(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "malformed_action", e.to_string()),
        RetrievalError::Launch(_) => ApiError::new(StatusCode::BAD_GATEWAY, "launch_error", e.to_string()),
    }
}

async fn get_config(State(state): State<Shared>) -> ApiResult {
    let (w, h) = state.recorder.backend().native_resolution();
    Ok(ok(json!({
        "config": state.config(),
        "native_resolution": [w, h],
    })))
}

#[derive(Debug, Deserialize)]
struct ConfigBody {
    interval_s: u32,
    scale: f64,
    quality: f64,
    retention_days: u32,
    capture_on_app_switch: bool,
    #[serde(default)]
    storage_root: Option<PathBuf>,
}

async fn put_config(State(state): State<Shared>, Json(body): Json<ConfigBody>) -> ApiResult {
    if state.read_only {
        return Err(ApiError::read_only());
    }
    let _serial = state.commands.lock().await;
    let root = state.store.root().to_path_buf();
    if body.storage_root.as_ref().is_some_and(|r| *r != root) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "storage_root_immutable",
            "storage_root cannot be changed while the service runs",
        ));
    }
    let candidate = CaptureConfig {
        interval_s: body.interval_s,
        scale: body.scale,
        quality: body.quality,
        retention_days: body.retention_days,
        capture_on_app_switch: body.capture_on_app_switch,
        storage_root: root,
    };
    let (w, h) = state.recorder.backend().native_resolution();
    validate_config(&candidate, w, h)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", e.to_string()))?;
    settings::save_config(&candidate).map_err(|e| ApiError::internal(format!("{e:#}")))?;
    *state.config.write().unwrap() = candidate.clone();
    Ok(ok(json!({ "config": candidate })))
}

#[derive(Debug, Deserialize)]
struct EstimateQuery {
    hours: f64,
}

async fn get_estimate(State(state): State<Shared>, Query(q): Query<EstimateQuery>) -> ApiResult {
    if !(q.hours.is_finite() && q.hours >= 0.0) {
        return Err(ApiError::bad_request("hours must be a non-negative number"));
    }
    let (w, h) = state.recorder.backend().native_resolution();
    let est = estimate_disk(&state.config(), w, h, q.hours);
    Ok(ok(json!({
        "hours": q.hours,
        "frames": est.frames,
        "bytes_per_frame": est.bytes_per_frame,
        "bytes": est.bytes,
    })))
}

async fn run_gc(state: Shared, today: NaiveDate) -> Result<lapse_core::GcReport, ApiError> {
    let _serial = state.commands.lock().await;
    let policy = RetentionPolicy::new(state.config().retention_days);
    let store = Arc::clone(&state.store);
    tokio::task::spawn_blocking(move || store.run_gc(policy, today))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| match e {
            GcError::Partial { report, survivors } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "partial_gc", "some deletions failed; rerun is safe")
                    .with_details(json!({ "report": report, "survivors": survivors }))
            }
            GcError::Store(e) => e.into(),
        })
}

async fn post_gc(State(state): State<Shared>) -> ApiResult {
    if state.read_only {
        return Err(ApiError::read_only());
    }
    let report = run_gc(state, Local::now().date_naive()).await?;
    Ok(ok(report))
}

async fn get_stats(State(state): State<Shared>) -> ApiResult {
    Ok(ok(state.store.stats()?))
}

async fn post_record_start(State(state): State<Shared>) -> ApiResult {
    if state.read_only {
        return Err(ApiError::read_only());
    }
    let _serial = state.commands.lock().await;
    let cfg = state.config();
    let (w, h) = state.recorder.backend().native_resolution();
    validate_config(&cfg, w, h)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", e.to_string()))?;
    let started = state
        .recorder
        .start(cfg, Arc::clone(&state.store), Arc::clone(&state.categories));
    Ok(ok(json!({ "started": started, "status": state.recorder.status() })))
}

async fn post_record_stop(State(state): State<Shared>) -> ApiResult {
    if state.read_only {
        return Err(ApiError::read_only());
    }
    let _serial = state.commands.lock().await;
    let worker = Arc::clone(&state);
    let stopped = tokio::task::spawn_blocking(move || worker.recorder.stop())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(ok(json!({ "stopped": stopped, "status": state.recorder.status() })))
}

async fn get_record_status(State(state): State<Shared>) -> ApiResult {
    Ok(ok(state.recorder.status()))
}

async fn post_categories_reload(State(state): State<Shared>) -> ApiResult {
    if state.read_only {
        return Err(ApiError::read_only());
    }
    let _serial = state.commands.lock().await;
    let (map, warnings) = settings::load_categories(state.store.root())
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "malformed_map", format!("{e:#}")))?;
    let body = json!({
        "version": map.version,
        "rules": map.rules().len(),
        "warnings": warnings.iter().map(ToString::to_string).collect::<Vec<_>>(),
    });
    state.categories.replace(map);
    Ok(ok(body))
}

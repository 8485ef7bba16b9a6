#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use chrono::{DateTime, Duration, NaiveDate};
use http_body_util::BodyExt;
use lapse_cli::api::{self, AppState};
use lapse_cli::recorder::SyntheticBackend;
use lapse_core::capture::SyntheticSource;
use lapse_core::retrieval::RecordingLauncher;
use lapse_core::{AppSnapshot, CaptureConfig, CaptureTrigger, CategoryMap, FrameMeta, FrameSource, FrameStore, SharedCategoryMap};
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

pub const NATIVE: (u32, u32) = (400, 320);

pub struct Fixture {
    pub dir: TempDir,
    pub state: Arc<AppState>,
    pub launcher: Arc<RecordingLauncher>,
    pub date: NaiveDate,
    pub doc_path: PathBuf,
    pub gone_path: PathBuf,
}

/// A store with one day of five frames: browser, document, project,
/// a no-metadata application, and a document whose file has since been deleted.
pub fn fixture(read_only: bool) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(FrameStore::open(dir.path()).unwrap());
    let cfg = CaptureConfig::new(dir.path());
    let work = dir.path().join("work");
    fs::create_dir_all(&work).unwrap();
    let doc_path = work.join("report.docx");
    fs::write(&doc_path, b"draft").unwrap();
    let gone_path = work.join("deleted.docx");

    let map = CategoryMap::builtin();
    let snapshots = [
        AppSnapshot::app("org.mozilla.firefox", "Firefox").with_url("https://example.org/a", "A"),
        AppSnapshot::app("com.microsoft.Word", "Word").with_file(doc_path.to_string_lossy()),
        AppSnapshot::app("com.jetbrains.intellij", "IntelliJ IDEA").with_project(work.to_string_lossy()),
        AppSnapshot::app("com.apple.Dictionary", "Dictionary"),
        AppSnapshot::app("com.microsoft.Word", "Word").with_file(gone_path.to_string_lossy()),
    ];
    let start = DateTime::parse_from_rfc3339("2024-06-01T09:00:00+00:00").unwrap();
    let keys: Vec<u64> = (0..snapshots.len() as u64).collect();
    let mut source = SyntheticSource::from_keys(3, NATIVE.0, NATIVE.1, &keys);
    for (i, snap) in snapshots.iter().enumerate() {
        let frame = source.next_frame(start + Duration::seconds(10 * i as i64)).unwrap();
        store
            .append(&frame, &FrameMeta::classify(&map, snap), CaptureTrigger::Interval, &cfg)
            .unwrap();
    }

    let launcher = Arc::new(RecordingLauncher::new());
    let state = Arc::new(AppState::new(
        store,
        cfg,
        Arc::new(SharedCategoryMap::new(map)),
        launcher.clone(),
        Arc::new(SyntheticBackend {
            native: NATIVE,
            ..SyntheticBackend::default()
        }),
        read_only,
    ));
    Fixture {
        dir,
        state,
        launcher,
        date: NaiveDate::from_ymd_opt(2024, 6, 1).unwrap(),
        doc_path,
        gone_path,
    }
}

pub struct Reply {
    pub status: StatusCode,
    pub schema_header: Option<String>,
    pub content_type: Option<String>,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap()
    }
}

pub async fn call(state: &Arc<AppState>, method: Method, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let res = api::router(Arc::clone(state))
        .oneshot(req.body(body).unwrap())
        .await
        .unwrap();
    let header = |name: &str| {
        res.headers()
            .get(name)
            .map(|v| v.to_str().unwrap().to_owned())
    };
    let schema_header = header("x-schema-version");
    let content_type = header("content-type");
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        schema_header,
        content_type,
        bytes,
    }
}

pub async fn get(state: &Arc<AppState>, uri: &str) -> Reply {
    call(state, Method::GET, uri, None).await
}

pub async fn post(state: &Arc<AppState>, uri: &str, body: Option<Value>) -> Reply {
    call(state, Method::POST, uri, body).await
}

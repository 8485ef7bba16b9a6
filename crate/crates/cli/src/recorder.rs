//! Background capture thread controlled by the service.

use std::sync::mpsc::Receiver;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use lapse_core::capture::{
    CaptureLoop, FrameSource, LoopSummary, MetadataProvider, NullProvider, StopSignal, SyntheticSource,
    SystemClock, DEFAULT_PROVIDER_TIMEOUT,
};
use lapse_core::{CaptureConfig, FrameStore, SharedCategoryMap};
use serde::Serialize;

/// Inputs for one recording session.
pub struct BackendSession {
    pub source: Box<dyn FrameSource + Send>,
    pub provider: Arc<dyn MetadataProvider>,
    pub app_switches: Option<Receiver<()>>,
}

/// Supplies a frame source and metadata provider for each recording session.
/// Platform screen-capture adapters implement this outside the core.
pub trait CaptureBackend: Send + Sync {
    fn name(&self) -> &str;
    fn native_resolution(&self) -> (u32, u32);
    fn open(&self, cfg: &CaptureConfig) -> BackendSession;
}

/// Procedurally generated screens; the screen changes every `hold` frames.
pub struct SyntheticBackend {
    pub seed: u64,
    pub native: (u32, u32),
    pub hold: u64,
}

impl Default for SyntheticBackend {
    fn default() -> Self {
        Self {
            seed: 0,
            native: (1440, 1080),
            hold: 6,
        }
    }
}

impl CaptureBackend for SyntheticBackend {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn native_resolution(&self) -> (u32, u32) {
        self.native
    }

    fn open(&self, cfg: &CaptureConfig) -> BackendSession {
        let keys: Vec<u64> = (0..10_000).map(|i| i / self.hold.max(1)).collect();
        let source = SyntheticSource::from_keys(self.seed, self.native.0, self.native.1, &keys).with_scale(cfg.scale);
        BackendSession {
            source: Box::new(source),
            provider: Arc::new(NullProvider),
            app_switches: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RecorderStatus {
    pub recording: bool,
    pub backend: String,
    pub last_run: Option<LoopSummary>,
    pub last_error: Option<String>,
}

struct Running {
    stop: StopSignal,
    handle: JoinHandle<()>,
}

#[derive(Default)]
struct Outcome {
    summary: Option<LoopSummary>,
    error: Option<String>,
}

pub struct Recorder {
    backend: Arc<dyn CaptureBackend>,
    running: Mutex<Option<Running>>,
    outcome: Arc<Mutex<Outcome>>,
}

impl Recorder {
    pub fn new(backend: Arc<dyn CaptureBackend>) -> Self {
        Self {
            backend,
            running: Mutex::new(None),
            outcome: Arc::default(),
        }
    }

    pub fn backend(&self) -> &dyn CaptureBackend {
        &*self.backend
    }

    /// Starts a capture thread. Returns `false` if one is already running.
    pub fn start(&self, cfg: CaptureConfig, store: Arc<FrameStore>, categories: Arc<SharedCategoryMap>) -> bool {
        let mut running = self.running.lock().unwrap();
        if running.as_ref().is_some_and(|r| !r.handle.is_finished()) {
            return false;
        }
        let stop = StopSignal::new();
        let session = self.backend.open(&cfg);
        let outcome = Arc::clone(&self.outcome);
        let thread_stop = stop.clone();
        let handle = thread::Builder::new()
            .name("capture".into())
            .spawn(move || {
                let BackendSession {
                    mut source,
                    provider,
                    app_switches,
                } = session;
                let mut clock = SystemClock::new(thread_stop.clone());
                if let Some(rx) = app_switches {
                    clock = clock.with_app_switches(rx);
                }
                let result = CaptureLoop {
                    cfg,
                    source: &mut *source,
                    provider,
                    categories: &categories,
                    sink: &*store,
                    provider_timeout: DEFAULT_PROVIDER_TIMEOUT,
                }
                .run(&mut clock, &thread_stop);
                let mut outcome = outcome.lock().unwrap();
                match result {
                    Ok(summary) => {
                        tracing::info!("capture stopped after {} records", summary.records);
                        *outcome = Outcome {
                            summary: Some(summary),
                            error: None,
                        };
                    }
                    Err(e) => {
                        tracing::error!("capture halted: {e}");
                        outcome.error = Some(e.to_string());
                    }
                }
            })
            .expect("spawning capture thread");
        *running = Some(Running { stop, handle });
        true
    }

    /// Stops the capture thread and waits for it. Returns `false` if nothing
    /// was running.
    pub fn stop(&self) -> bool {
        let Some(running) = self.running.lock().unwrap().take() else {
            return false;
        };
        let was_live = !running.handle.is_finished();
        running.stop.stop();
        let _ = running.handle.join();
        was_live
    }

    pub fn status(&self) -> RecorderStatus {
        let recording = self
            .running
            .lock()
            .unwrap()
            .as_ref()
            .is_some_and(|r| !r.handle.is_finished());
        let outcome = self.outcome.lock().unwrap();
        RecorderStatus {
            recording,
            backend: self.backend.name().to_owned(),
            last_run: outcome.summary.clone(),
            last_error: outcome.error.clone(),
        }
    }
}

impl Drop for Recorder {
    fn drop(&mut self) {
        self.stop();
    }
}

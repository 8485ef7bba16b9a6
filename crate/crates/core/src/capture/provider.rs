use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What the metadata provider saw for the frontmost application.
///
/// An empty `app_id` is the "no metadata" marker.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppSnapshot {
    pub app_id: String,
    pub app_name: String,
    pub window_title: Option<String>,
    pub url: Option<String>,
    pub page_title: Option<String>,
    pub file_path: Option<String>,
    pub project_root: Option<String>,
}

impl AppSnapshot {
    pub fn no_metadata() -> Self {
        Self::default()
    }

    pub fn is_no_metadata(&self) -> bool {
        self.app_id.is_empty()
    }

    pub fn app(app_id: impl Into<String>, app_name: impl Into<String>) -> Self {
        Self {
            app_id: app_id.into(),
            app_name: app_name.into(),
            ..Self::default()
        }
    }

    pub fn with_url(mut self, url: impl Into<String>, title: impl Into<String>) -> Self {
        self.url = Some(url.into());
        self.page_title = Some(title.into());
        self
    }

    pub fn with_file(mut self, path: impl Into<String>) -> Self {
        self.file_path = Some(path.into());
        self
    }

    pub fn with_project(mut self, root: impl Into<String>) -> Self {
        self.project_root = Some(root.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("metadata provider did not answer within {0:?}")]
    Timeout(Duration),
    #[error("metadata provider failed: {0}")]
    Failed(String),
}

/// Source of frontmost-application metadata (accessibility APIs, scripting
/// bridges, or a mock).
pub trait MetadataProvider: Send + Sync {
    fn snapshot(&self) -> Result<AppSnapshot, ProviderError>;
}

/// Polls `provider` on a helper thread and gives up after `timeout`, so a hung
/// provider cannot stall the caller.
pub fn try_poll_frontmost(
    provider: &Arc<dyn MetadataProvider>,
    timeout: Duration,
) -> Result<AppSnapshot, ProviderError> {
    let (tx, rx) = mpsc::sync_channel(1);
    let provider = Arc::clone(provider);
    thread::Builder::new()
        .name("metadata-poll".into())
        .spawn(move || {
            let _ = tx.send(provider.snapshot());
        })
        .map_err(|e| ProviderError::Failed(e.to_string()))?;
    match rx.recv_timeout(timeout) {
        Ok(result) => result,
        Err(_) => Err(ProviderError::Timeout(timeout)),
    }
}

/// Like [`try_poll_frontmost`] but folds every failure into the
/// "no metadata" snapshot.
pub fn poll_frontmost(provider: &Arc<dyn MetadataProvider>, timeout: Duration) -> AppSnapshot {
    match try_poll_frontmost(provider, timeout) {
        Ok(snapshot) => snapshot,
        Err(e) => {
            tracing::debug!("no metadata for this frame: {e}");
            AppSnapshot::no_metadata()
        }
    }
}

/// Provider that never knows anything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullProvider;

impl MetadataProvider for NullProvider {
    fn snapshot(&self) -> Result<AppSnapshot, ProviderError> {
        Ok(AppSnapshot::no_metadata())
    }
}

#[derive(Debug, Clone)]
pub enum ProviderStep {
    Answer(AppSnapshot),
    Fail,
    /// Sleeps for the given time, then answers with the snapshot.
    Hang(Duration, AppSnapshot),
}

/// Mock provider replaying a script of answers. The last step repeats once
/// the script runs out.
#[derive(Debug)]
pub struct ScriptedProvider {
    steps: Vec<ProviderStep>,
    next: Mutex<usize>,
}

impl ScriptedProvider {
    pub fn new(steps: Vec<ProviderStep>) -> Self {
        assert!(!steps.is_empty(), "provider script must not be empty");
        Self {
            steps,
            next: Mutex::new(0),
        }
    }

    pub fn always(snapshot: AppSnapshot) -> Self {
        Self::new(vec![ProviderStep::Answer(snapshot)])
    }

    pub fn failing() -> Self {
        Self::new(vec![ProviderStep::Fail])
    }

    pub fn calls(&self) -> usize {
        *self.next.lock()
    }
}

impl MetadataProvider for ScriptedProvider {
    fn snapshot(&self) -> Result<AppSnapshot, ProviderError> {
        let step = {
            let mut next = self.next.lock();
            let step = self.steps[(*next).min(self.steps.len() - 1)].clone();
            *next += 1;
            step
        };
        match step {
            ProviderStep::Answer(s) => Ok(s),
            ProviderStep::Fail => Err(ProviderError::Failed("scripted failure".into())),
            ProviderStep::Hang(d, s) => {
                thread::sleep(d);
                Ok(s)
            }
        }
    }
}

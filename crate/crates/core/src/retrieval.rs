//! Turning a recorded frame into the action that reopens what it shows.

use std::path::Path;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::{AppCategory, Locator};
use crate::store::FrameRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    OpenUrl,
    OpenFile,
    OpenEnclosingFolder,
    OpenProject,
    LaunchApp,
}

impl ActionKind {
    fn is_local_path(self) -> bool {
        matches!(
            self,
            ActionKind::OpenFile | ActionKind::OpenEnclosingFolder | ActionKind::OpenProject
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalAction {
    pub kind: ActionKind,
    pub target: String,
    pub app_hint: String,
}

impl RetrievalAction {
    fn new(kind: ActionKind, target: impl Into<String>, app_hint: &str) -> Self {
        Self {
            kind,
            target: target.into(),
            app_hint: app_hint.to_owned(),
        }
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        let problem = match self.kind {
            ActionKind::LaunchApp if !self.target.is_empty() => "launch_app takes no target",
            ActionKind::LaunchApp if self.app_hint.is_empty() => "no application to launch",
            ActionKind::LaunchApp => return Ok(()),
            _ if self.target.is_empty() => "empty target",
            _ => return Ok(()),
        };
        Err(RetrievalError::Malformed(problem.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct LaunchError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrievalError {
    #[error("no folder to open for a {0} frame")]
    NotApplicable(AppCategory),
    #[error("malformed action: {0}")]
    Malformed(String),
    #[error("file no longer at recorded path {0}")]
    OpenTargetMissing(String),
    #[error("launch failed: {0}")]
    Launch(#[from] LaunchError),
}

/// The default one-click action for a frame. Falls back to launching the
/// application when the locator is empty.
pub fn derive_action(record: &FrameRecord) -> RetrievalAction {
    let app = record.app_id.as_str();
    match (record.category, &record.locator) {
        (AppCategory::WebBrowser, Locator::Web { url, .. }) if !url.is_empty() => {
            RetrievalAction::new(ActionKind::OpenUrl, url, app)
        }
        (AppCategory::DocumentEditor, Locator::File { path, .. }) if !path.is_empty() => {
            RetrievalAction::new(ActionKind::OpenFile, path, app)
        }
        (AppCategory::ProjectBased, Locator::Project { root }) if !root.is_empty() => {
            RetrievalAction::new(ActionKind::OpenProject, root, app)
        }
        _ => RetrievalAction::new(ActionKind::LaunchApp, "", app),
    }
}

/// Opens the folder containing a document. Only document frames with a
/// recorded path have one.
pub fn derive_folder_action(record: &FrameRecord) -> Result<RetrievalAction, RetrievalError> {
    match (record.category, &record.locator) {
        (AppCategory::DocumentEditor, Locator::File { path, .. }) if !path.is_empty() => {
            let parent = match Path::new(path).parent() {
                Some(p) if p.as_os_str().is_empty() => ".".to_owned(),
                Some(p) => p.to_string_lossy().into_owned(),
                None => path.clone(),
            };
            Ok(RetrievalAction::new(
                ActionKind::OpenEnclosingFolder,
                parent,
                &record.app_id,
            ))
        }
        (category, _) => Err(RetrievalError::NotApplicable(category)),
    }
}

pub trait Launcher: Send + Sync {
    fn launch(&self, action: &RetrievalAction) -> Result<(), LaunchError>;
}

/// Checks `action` and hands it to `launcher`. Local paths that no longer
/// exist are reported without calling the launcher; URLs are not checked.
pub fn execute(action: &RetrievalAction, launcher: &dyn Launcher) -> Result<(), RetrievalError> {
    action.validate()?;
    if action.kind.is_local_path() && !Path::new(&action.target).exists() {
        return Err(RetrievalError::OpenTargetMissing(action.target.clone()));
    }
    launcher.launch(action)?;
    Ok(())
}

/// Serializes launches so at most one is in flight.
pub struct Dispatcher<L> {
    gate: Mutex<()>,
    launcher: L,
}

impl<L: Launcher> Dispatcher<L> {
    pub fn new(launcher: L) -> Self {
        Self {
            gate: Mutex::new(()),
            launcher,
        }
    }

    pub fn execute(&self, action: &RetrievalAction) -> Result<(), RetrievalError> {
        let _one_at_a_time = self.gate.lock();
        execute(action, &self.launcher)
    }

    pub fn launcher(&self) -> &L {
        &self.launcher
    }
}

impl<T: Launcher + ?Sized> Launcher for std::sync::Arc<T> {
    fn launch(&self, action: &RetrievalAction) -> Result<(), LaunchError> {
        (**self).launch(action)
    }
}

impl<T: Launcher + ?Sized> Launcher for Box<T> {
    fn launch(&self, action: &RetrievalAction) -> Result<(), LaunchError> {
        (**self).launch(action)
    }
}

/// Test launcher: records every action in call order and never touches the OS.
#[derive(Debug, Default)]
pub struct RecordingLauncher {
    log: Mutex<Vec<RetrievalAction>>,
    fail_with: Option<String>,
}

impl RecordingLauncher {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records calls but reports every launch as failed.
    pub fn failing(message: impl Into<String>) -> Self {
        Self {
            log: Mutex::default(),
            fail_with: Some(message.into()),
        }
    }

    pub fn log(&self) -> Vec<RetrievalAction> {
        self.log.lock().clone()
    }
}

impl Launcher for RecordingLauncher {
    fn launch(&self, action: &RetrievalAction) -> Result<(), LaunchError> {
        self.log.lock().push(action.clone());
        match &self.fail_with {
            Some(msg) => Err(LaunchError(msg.clone())),
            None => Ok(()),
        }
    }
}

/// Opens targets with the desktop's default handler.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemLauncher;

impl Launcher for SystemLauncher {
    fn launch(&self, action: &RetrievalAction) -> Result<(), LaunchError> {
        let err = |e: std::io::Error| LaunchError(e.to_string());
        match action.kind {
            ActionKind::LaunchApp => launch_app(&action.app_hint).map_err(err),
            _ => open::that_detached(&action.target).map_err(err),
        }
    }
}

#[cfg(target_os = "macos")]
fn launch_app(app_id: &str) -> std::io::Result<()> {
    std::process::Command::new("open")
        .args(["-b", app_id])
        .spawn()
        .map(drop)
}

#[cfg(not(target_os = "macos"))]
fn launch_app(app_id: &str) -> std::io::Result<()> {
    std::process::Command::new(app_id).spawn().map(drop)
}

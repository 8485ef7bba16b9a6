//! Periodic and app-switch-triggered frame acquisition.

mod clock;
mod provider;
mod synthetic;

use std::sync::Arc;
use std::time::Duration;

use chrono::TimeDelta;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clock::{Clock, ScriptedClock, StopSignal, SystemClock, Timestamp, Wake};
pub use provider::{
    poll_frontmost, try_poll_frontmost, AppSnapshot, MetadataProvider, NullProvider, ProviderError,
    ProviderStep, ScriptedProvider,
};
pub use synthetic::{scale_nearest, ScriptFrame, SyntheticSource};

use crate::config::{validate_config, CaptureConfig, ConfigError};
use crate::registry::CategoryMap;
use crate::store::{pixel_digest, FrameMeta, FrameRecord, FrameStore, StoreError};

/// Frames are packed RGB8.
pub const CHANNELS: usize = 3;

/// No more than one app-switch capture per this window, and an interval tick
/// falling this soon after an app-switch capture is skipped.
pub const APP_SWITCH_DEBOUNCE: TimeDelta = TimeDelta::milliseconds(500);

pub const DEFAULT_PROVIDER_TIMEOUT: Duration = Duration::from_millis(750);

/// A scaled screen frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    pub captured_at: Timestamp,
    pub width: u32,
    pub height: u32,
    /// `width * height * CHANNELS` bytes, row-major.
    pub pixels: Vec<u8>,
    pub native_w: u32,
    pub native_h: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureTrigger {
    Interval,
    AppSwitch,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("frame source unavailable: {0}")]
pub struct SourceUnavailable(pub String);

pub trait FrameSource {
    fn native_resolution(&self) -> (u32, u32);

    /// Grabs the current screen, already scaled.
    fn next_frame(&mut self, captured_at: Timestamp) -> Result<RawFrame, SourceUnavailable>;
}

#[derive(Debug, Error)]
pub enum SinkError {
    /// Storage cannot take more writes; the loop halts.
    #[error("sink full: {0}")]
    Full(String),
    /// This frame was dropped; the loop carries on.
    #[error("frame rejected: {0}")]
    Rejected(String),
}

/// Where captured frames go.
pub trait FrameSink {
    fn append(
        &self,
        frame: &RawFrame,
        meta: &FrameMeta,
        trigger: CaptureTrigger,
        cfg: &CaptureConfig,
    ) -> Result<FrameRecord, SinkError>;
}

impl FrameSink for FrameStore {
    fn append(
        &self,
        frame: &RawFrame,
        meta: &FrameMeta,
        trigger: CaptureTrigger,
        cfg: &CaptureConfig,
    ) -> Result<FrameRecord, SinkError> {
        FrameStore::append(self, frame, meta, trigger, cfg).map_err(|e| match e {
            StoreError::Encode(_) | StoreError::BadFrame { .. } | StoreError::OutOfOrder { .. } => {
                SinkError::Rejected(e.to_string())
            }
            other => SinkError::Full(other.to_string()),
        })
    }
}

/// In-memory sink keeping every record; blob identity is the pixel digest,
/// as in [`FrameStore`].
#[derive(Debug, Default)]
pub struct MemorySink {
    records: Mutex<Vec<FrameRecord>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> Vec<FrameRecord> {
        self.records.lock().clone()
    }
}

impl FrameSink for MemorySink {
    fn append(
        &self,
        frame: &RawFrame,
        meta: &FrameMeta,
        trigger: CaptureTrigger,
        _cfg: &CaptureConfig,
    ) -> Result<FrameRecord, SinkError> {
        let record = FrameRecord {
            ts: frame.captured_at,
            blob: pixel_digest(&frame.pixels),
            w: frame.width,
            h: frame.height,
            app_id: meta.app_id.clone(),
            app_name: meta.app_name.clone(),
            category: meta.category,
            label: meta.label.clone(),
            locator: meta.locator.clone(),
            trigger,
        };
        self.records.lock().push(record.clone());
        Ok(record)
    }
}

/// The active category map, swappable while capture runs.
#[derive(Debug, Default)]
pub struct SharedCategoryMap(RwLock<Arc<CategoryMap>>);

impl SharedCategoryMap {
    pub fn new(map: CategoryMap) -> Self {
        Self(RwLock::new(Arc::new(map)))
    }

    pub fn current(&self) -> Arc<CategoryMap> {
        Arc::clone(&self.0.read())
    }

    pub fn replace(&self, map: CategoryMap) {
        *self.0.write() = Arc::new(map);
    }
}

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("storage write failed, capture halted: {0}")]
    SinkFull(String),
}

/// Counters for one run of the loop.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopSummary {
    pub records: u64,
    pub interval_captures: u64,
    pub app_switch_captures: u64,
    pub debounced: u64,
    pub source_unavailable: u64,
    pub rejected: u64,
    pub last: Option<Timestamp>,
}

/// Timestamp for the next record: `now`, or 1 ms after `last` if the wall
/// clock went backwards.
pub fn monotonic_stamp(now: Timestamp, last: Option<Timestamp>) -> Timestamp {
    match last {
        Some(last) if now <= last => last + TimeDelta::milliseconds(1),
        _ => now,
    }
}

fn within_debounce(earlier: Option<Timestamp>, at: Timestamp) -> bool {
    earlier.is_some_and(|s| at >= s && at - s < APP_SWITCH_DEBOUNCE)
}

/// Everything a capture run needs besides the clock.
pub struct CaptureLoop<'a> {
    pub cfg: CaptureConfig,
    pub source: &'a mut dyn FrameSource,
    pub provider: Arc<dyn MetadataProvider>,
    pub categories: &'a SharedCategoryMap,
    pub sink: &'a dyn FrameSink,
    pub provider_timeout: Duration,
}

impl CaptureLoop<'_> {
    /// Runs until the clock or `stop` ends the run. The first interval tick
    /// fires immediately.
    pub fn run(&mut self, clock: &mut dyn Clock, stop: &StopSignal) -> Result<LoopSummary, CaptureError> {
        let (native_w, native_h) = self.source.native_resolution();
        validate_config(&self.cfg, native_w, native_h)?;
        let interval = TimeDelta::seconds(i64::from(self.cfg.interval_s));

        let mut summary = LoopSummary::default();
        let mut next_tick = clock.now();
        let mut last_switch: Option<Timestamp> = None;

        loop {
            if stop.is_stopped() {
                break;
            }
            match clock.wait_until(next_tick) {
                Wake::Stop => break,
                Wake::Deadline => {
                    if within_debounce(last_switch, next_tick) {
                        summary.debounced += 1;
                    } else {
                        self.capture(clock, CaptureTrigger::Interval, &mut summary)?;
                    }
                    next_tick += interval;
                    let now = clock.now();
                    if next_tick <= now {
                        let missed = (now - next_tick).num_milliseconds() / interval.num_milliseconds() + 1;
                        tracing::warn!("capture fell behind; skipping {missed} ticks");
                        next_tick += interval * missed as i32;
                    }
                }
                Wake::AppSwitch => {
                    if !self.cfg.capture_on_app_switch {
                        continue;
                    }
                    let now = clock.now();
                    if within_debounce(last_switch, now) {
                        summary.debounced += 1;
                        continue;
                    }
                    if let Some(ts) = self.capture(clock, CaptureTrigger::AppSwitch, &mut summary)? {
                        last_switch = Some(ts);
                    }
                }
            }
        }
        Ok(summary)
    }

    fn capture(
        &mut self,
        clock: &dyn Clock,
        trigger: CaptureTrigger,
        summary: &mut LoopSummary,
    ) -> Result<Option<Timestamp>, CaptureError> {
        let ts = monotonic_stamp(clock.now(), summary.last);
        let frame = match self.source.next_frame(ts) {
            Ok(f) => f,
            Err(e) => {
                tracing::warn!("{e}; retrying next tick");
                summary.source_unavailable += 1;
                return Ok(None);
            }
        };
        let snapshot = poll_frontmost(&self.provider, self.provider_timeout);
        let meta = FrameMeta::classify(&self.categories.current(), &snapshot);
        match self.sink.append(&frame, &meta, trigger, &self.cfg) {
            Ok(record) => {
                summary.records += 1;
                match trigger {
                    CaptureTrigger::Interval => summary.interval_captures += 1,
                    CaptureTrigger::AppSwitch => summary.app_switch_captures += 1,
                }
                summary.last = Some(record.ts);
                Ok(Some(record.ts))
            }
            Err(SinkError::Rejected(msg)) => {
                tracing::error!("dropping frame at {ts}: {msg}");
                summary.rejected += 1;
                summary.last = Some(ts);
                Ok(None)
            }
            Err(SinkError::Full(msg)) => Err(CaptureError::SinkFull(msg)),
        }
    }
}

/// Convenience wrapper over [`CaptureLoop::run`] with the default provider
/// timeout.
pub fn run_capture_loop(
    cfg: &CaptureConfig,
    source: &mut dyn FrameSource,
    provider: Arc<dyn MetadataProvider>,
    categories: &SharedCategoryMap,
    sink: &dyn FrameSink,
    clock: &mut dyn Clock,
    stop: &StopSignal,
) -> Result<LoopSummary, CaptureError> {
    CaptureLoop {
        cfg: cfg.clone(),
        source,
        provider,
        categories,
        sink,
        provider_timeout: DEFAULT_PROVIDER_TIMEOUT,
    }
    .run(clock, stop)
}

#[cfg(test)]
mod tests;

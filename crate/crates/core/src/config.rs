//! Recording parameters and their bounds.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest allowed gap between periodic captures, in seconds.
pub const MAX_INTERVAL_S: u32 = 60;

/// Smallest allowed length of the shorter side of a stored frame, in pixels.
pub const MIN_FRAME_DIMENSION: u32 = 320;

/// User-tunable recording parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureConfig {
    /// Seconds between periodic captures.
    pub interval_s: u32,
    /// Fraction of the native resolution applied to both dimensions.
    pub scale: f64,
    /// JPEG quality in `(0, 1]`.
    pub quality: f64,
    /// Number of most recent local days kept by garbage collection.
    pub retention_days: u32,
    /// Also capture whenever the frontmost application changes.
    pub capture_on_app_switch: bool,
    pub storage_root: PathBuf,
}

impl CaptureConfig {
    pub fn new(storage_root: impl Into<PathBuf>) -> Self {
        Self {
            interval_s: 10,
            scale: 1.0,
            quality: 0.8,
            retention_days: 10,
            capture_on_app_switch: true,
            storage_root: storage_root.into(),
        }
    }

    /// Size of a frame after scaling, `(round(w * scale), round(h * scale))`.
    pub fn scaled_dims(&self, native_w: u32, native_h: u32) -> (u32, u32) {
        (
            scale_dim(native_w, self.scale),
            scale_dim(native_h, self.scale),
        )
    }

    /// JPEG encoder quality on the usual 1..=100 scale.
    pub fn jpeg_quality(&self) -> u8 {
        (self.quality * 100.0).round().clamp(1.0, 100.0) as u8
    }
}

pub(crate) fn scale_dim(native: u32, scale: f64) -> u32 {
    (f64::from(native) * scale).round() as u32
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("capture interval {interval_s} s exceeds the {MAX_INTERVAL_S} s maximum")]
    IntervalTooLong { interval_s: u32 },
    #[error(
        "scaled frame is {width}x{height}; the shorter side must be at least {MIN_FRAME_DIMENSION} px"
    )]
    FrameTooSmall { width: u32, height: u32 },
    #[error("{field} = {value} is outside {expected}")]
    BadRange {
        field: &'static str,
        value: String,
        expected: &'static str,
    },
}

/// Checks every bound of `cfg` against the frame source's native resolution.
pub fn validate_config(cfg: &CaptureConfig, native_w: u32, native_h: u32) -> Result<(), ConfigError> {
    if cfg.interval_s < 1 {
        return Err(ConfigError::BadRange {
            field: "interval_s",
            value: cfg.interval_s.to_string(),
            expected: ">= 1",
        });
    }
    if cfg.interval_s > MAX_INTERVAL_S {
        return Err(ConfigError::IntervalTooLong {
            interval_s: cfg.interval_s,
        });
    }
    if !(cfg.scale > 0.0 && cfg.scale <= 1.0) {
        return Err(ConfigError::BadRange {
            field: "scale",
            value: cfg.scale.to_string(),
            expected: "(0, 1]",
        });
    }
    if !(cfg.quality > 0.0 && cfg.quality <= 1.0) {
        return Err(ConfigError::BadRange {
            field: "quality",
            value: cfg.quality.to_string(),
            expected: "(0, 1]",
        });
    }
    if cfg.retention_days < 1 {
        return Err(ConfigError::BadRange {
            field: "retention_days",
            value: cfg.retention_days.to_string(),
            expected: ">= 1",
        });
    }
    let (width, height) = cfg.scaled_dims(native_w, native_h);
    if width.min(height) < MIN_FRAME_DIMENSION {
        return Err(ConfigError::FrameTooSmall { width, height });
    }
    Ok(())
}

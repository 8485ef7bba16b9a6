use serde::{Deserialize, Serialize};

use crate::config::CaptureConfig;

/// Stored bytes per frame pixel at quality 1.0. Bytes per pixel are modelled
/// as linear in quality; 0.56 reproduces roughly 694 KB per 1440x1080 frame at
/// quality 0.8.
pub const BYTES_PER_PIXEL_AT_FULL_QUALITY: f64 = 0.56;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskEstimate {
    pub frames: f64,
    pub bytes_per_frame: f64,
    pub bytes: f64,
}

/// Upper-bound disk use for `hours` of recording. Every frame is counted as a
/// fresh blob; no deduplication credit is taken.
pub fn estimate_disk(cfg: &CaptureConfig, native_w: u32, native_h: u32, hours: f64) -> DiskEstimate {
    let frames = hours * 3600.0 / f64::from(cfg.interval_s);
    let pixels = (f64::from(native_w) * cfg.scale) * (f64::from(native_h) * cfg.scale);
    let bytes_per_frame = BYTES_PER_PIXEL_AT_FULL_QUALITY * cfg.quality * pixels;
    DiskEstimate {
        frames,
        bytes_per_frame,
        bytes: frames * bytes_per_frame,
    }
}

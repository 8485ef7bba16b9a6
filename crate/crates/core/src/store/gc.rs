use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{blob, journal, FrameStore, StoreError};

/// Keep the most recent `retention_days` local days, today included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetentionPolicy {
    pub retention_days: u32,
}

impl RetentionPolicy {
    pub fn new(retention_days: u32) -> Self {
        Self { retention_days }
    }

    /// Oldest date that survives GC on `today`.
    pub fn oldest_kept(&self, today: NaiveDate) -> NaiveDate {
        let back = u64::from(self.retention_days.max(1) - 1);
        today.checked_sub_days(Days::new(back)).unwrap_or(NaiveDate::MIN)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcReport {
    pub segments_deleted: u64,
    pub blobs_deleted: u64,
    pub bytes_freed: u64,
}

impl GcReport {
    pub fn is_noop(&self) -> bool {
        *self == GcReport::default()
    }
}

#[derive(Debug, Error)]
pub enum GcError {
    /// Some deletions failed. `report` counts what was removed; rerunning is safe.
    #[error("garbage collection incomplete; {} paths survived", survivors.len())]
    Partial {
        report: GcReport,
        survivors: Vec<PathBuf>,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl FrameStore {
    /// Deletes every day older than the retention window, then every blob no
    /// surviving journal references.
    pub fn run_gc(&self, policy: RetentionPolicy, today: NaiveDate) -> Result<GcReport, GcError> {
        // Holding the writer lock keeps a blob written just before its journal
        // line from being swept.
        let _writer = self.writer.lock();
        let cutoff = policy.oldest_kept(today);
        let mut report = GcReport::default();
        let mut survivors = Vec::new();

        let days = journal::list_days(&self.root).map_err(|e| StoreError::io("listing journals", e))?;
        let mut kept = Vec::new();
        for (date, path) in days {
            if date >= cutoff {
                kept.push(path);
                continue;
            }
            let size = fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
            match fs::remove_file(&path) {
                Ok(()) => {
                    report.segments_deleted += 1;
                    report.bytes_freed += size;
                }
                Err(e) => {
                    tracing::warn!("gc: could not delete {}: {e}", path.display());
                    survivors.push(path.clone());
                    kept.push(path);
                }
            }
        }

        let mut live = HashSet::new();
        for path in &kept {
            let bytes = fs::read(path).map_err(|e| StoreError::io(format!("reading {}", path.display()), e))?;
            journal::referenced_blobs(&bytes, &mut live);
        }

        let blobs = blob::list_blobs(&self.root).map_err(|e| StoreError::io("listing blobs", e))?;
        for (hash, path, size) in blobs {
            if live.contains(&hash) {
                continue;
            }
            match fs::remove_file(&path) {
                Ok(()) => {
                    report.blobs_deleted += 1;
                    report.bytes_freed += size;
                }
                Err(e) => {
                    tracing::warn!("gc: could not delete {}: {e}", path.display());
                    survivors.push(path);
                }
            }
        }

        if survivors.is_empty() {
            Ok(report)
        } else {
            Err(GcError::Partial { report, survivors })
        }
    }
}

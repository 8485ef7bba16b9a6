//! Durable local storage for the visual history.
//!
//! Layout under the storage root:
//!
//! ```text
//! journal/YYYY-MM-DD.jsonl      one FrameRecord per line, append-only
//! blobs/<hh>/<sha256>.jpg       one JPEG per distinct pixel buffer
//! ```
//!
//! A blob is always fully written before the journal line that references it,
//! so a crash can lose at most the line, never leave a dangling reference.

mod blob;
mod estimate;
mod gc;
mod journal;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{Local, NaiveDate};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blob::{pixel_digest, BlobHash, BlobRef};
pub use estimate::{estimate_disk, DiskEstimate, BYTES_PER_PIXEL_AT_FULL_QUALITY};
pub use gc::{GcError, GcReport, RetentionPolicy};

use crate::capture::{AppSnapshot, CaptureTrigger, RawFrame, Timestamp, CHANNELS};
use crate::config::CaptureConfig;
use crate::registry::{self, AppCategory, CategoryMap, Locator};

/// One journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub ts: Timestamp,
    pub blob: BlobHash,
    pub w: u32,
    pub h: u32,
    pub app_id: String,
    pub app_name: String,
    pub category: AppCategory,
    pub label: String,
    pub locator: Locator,
    pub trigger: CaptureTrigger,
}

/// Classified metadata for the frontmost application of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub app_id: String,
    pub app_name: String,
    pub category: AppCategory,
    pub label: String,
    pub locator: Locator,
}

impl FrameMeta {
    pub fn no_metadata() -> Self {
        Self {
            app_id: String::new(),
            app_name: String::new(),
            category: AppCategory::NoMetadata,
            label: AppCategory::NoMetadata.default_label().to_owned(),
            locator: Locator::None,
        }
    }

    /// Classifies a snapshot against `map` and extracts its locator.
    pub fn classify(map: &CategoryMap, snapshot: &AppSnapshot) -> Self {
        if snapshot.is_no_metadata() {
            return Self::no_metadata();
        }
        let class = registry::classify(map, &snapshot.app_id);
        Self {
            app_id: snapshot.app_id.clone(),
            app_name: snapshot.app_name.clone(),
            category: class.category,
            label: class.label,
            locator: registry::extract_locator(class.category, snapshot),
        }
    }
}

/// All records captured on one local calendar day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySegment {
    pub date: NaiveDate,
    pub records: Vec<FrameRecord>,
    /// The day is over; nothing more will be appended.
    pub sealed: bool,
    /// Journal lines that were unreadable or out of place.
    pub skipped_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreStats {
    pub blob_count: u64,
    pub journal_days: u64,
    /// Bytes held by image blobs.
    pub total_bytes: u64,
    /// Journal lines per stored blob; 1.0 for an empty store.
    pub dedup_ratio: f64,
    pub journal_lines: u64,
    pub journal_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportReport {
    pub journal: PathBuf,
    pub blobs_copied: usize,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage full: {0}")]
    StorageFull(#[source] io::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("image encoding failed: {0}")]
    Encode(String),
    #[error("frame buffer is {len} bytes, expected {expected} for {width}x{height} RGB")]
    BadFrame {
        width: u32,
        height: u32,
        len: usize,
        expected: usize,
    },
    #[error("record at {ts} is not after the last record of its day ({last})")]
    OutOfOrder { ts: Timestamp, last: Timestamp },
    #[error("journal for {date} is corrupt: none of its {lines} lines parse")]
    CorruptJournal { date: NaiveDate, lines: usize },
    #[error("no journal for {0}")]
    NoSuchDay(NaiveDate),
    #[error("blob {0} is missing")]
    MissingBlob(BlobHash),
}

impl StoreError {
    fn io(context: impl Into<String>, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::StorageFull {
            StoreError::StorageFull(source)
        } else {
            StoreError::Io {
                context: context.into(),
                source,
            }
        }
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

/// Handle on a storage root. One writer (the capture loop) appends; any
/// number of readers may run alongside.
pub struct FrameStore {
    root: PathBuf,
    /// Last appended timestamp per day; held for the whole append and GC.
    writer: Mutex<HashMap<NaiveDate, Timestamp>>,
}

impl FrameStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for dir in [journal::JOURNAL_DIR, blob::BLOB_DIR] {
            let path = root.join(dir);
            fs::create_dir_all(&path)
                .map_err(|e| StoreError::io(format!("creating {}", path.display()), e))?;
        }
        Ok(Self {
            root,
            writer: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn journal_path(&self, date: NaiveDate) -> PathBuf {
        journal::journal_path(&self.root, date)
    }

    pub fn blob_path(&self, hash: &BlobHash) -> PathBuf {
        blob::blob_path(&self.root, hash)
    }

    /// Stores a frame. The blob is written only if no blob with the same pixel
    /// digest exists yet, and always before the journal line.
    pub fn append(
        &self,
        frame: &RawFrame,
        meta: &FrameMeta,
        trigger: CaptureTrigger,
        cfg: &CaptureConfig,
    ) -> Result<FrameRecord> {
        let expected = frame.width as usize * frame.height as usize * CHANNELS;
        if frame.pixels.len() != expected {
            return Err(StoreError::BadFrame {
                width: frame.width,
                height: frame.height,
                len: frame.pixels.len(),
                expected,
            });
        }
        let date = frame.captured_at.date_naive();
        let hash = pixel_digest(&frame.pixels);

        let mut last_ts = self.writer.lock();
        let last = match last_ts.get(&date) {
            Some(ts) => Some(*ts),
            None => self.read_day(date).ok().and_then(|s| s.records.last().map(|r| r.ts)),
        };
        if let Some(last) = last {
            if frame.captured_at <= last {
                return Err(StoreError::OutOfOrder {
                    ts: frame.captured_at,
                    last,
                });
            }
        }

        let path = self.blob_path(&hash);
        if !path.exists() {
            let jpg = blob::encode_jpeg(&frame.pixels, frame.width, frame.height, cfg.jpeg_quality())?;
            blob::write_atomically(&path, &jpg)
                .map_err(|e| StoreError::io(format!("writing blob {hash}"), e))?;
        }

        let record = FrameRecord {
            ts: frame.captured_at,
            blob: hash,
            w: frame.width,
            h: frame.height,
            app_id: meta.app_id.clone(),
            app_name: meta.app_name.clone(),
            category: meta.category,
            label: meta.label.clone(),
            locator: meta.locator.clone(),
            trigger,
        };
        journal::append_line(&self.journal_path(date), &record)
            .map_err(|e| StoreError::io(format!("appending to journal {date}"), e))?;
        last_ts.insert(date, record.ts);
        Ok(record)
    }

    /// Reads one day. Missing days are empty; unreadable lines are skipped.
    pub fn read_day(&self, date: NaiveDate) -> Result<DaySegment> {
        let path = self.journal_path(date);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(StoreError::io(format!("reading {}", path.display()), e)),
        };
        let parsed = journal::parse(&bytes, date);
        if parsed.records.is_empty() && parsed.nonblank_lines > 0 {
            return Err(StoreError::CorruptJournal {
                date,
                lines: parsed.nonblank_lines,
            });
        }
        if parsed.skipped > 0 {
            tracing::warn!("{date}: skipped {} unreadable journal lines", parsed.skipped);
        }
        Ok(DaySegment {
            date,
            records: parsed.records,
            sealed: date < Local::now().date_naive(),
            skipped_count: parsed.skipped,
        })
    }

    /// Days with a journal, most recent first.
    pub fn list_dates(&self) -> Result<Vec<NaiveDate>> {
        let mut days: Vec<_> = journal::list_days(&self.root)
            .map_err(|e| StoreError::io("listing journals", e))?
            .into_iter()
            .map(|(d, _)| d)
            .collect();
        days.reverse();
        Ok(days)
    }

    pub fn read_blob(&self, hash: &BlobHash) -> Result<Vec<u8>> {
        fs::read(self.blob_path(hash)).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::MissingBlob(hash.clone()),
            _ => StoreError::io(format!("reading blob {hash}"), e),
        })
    }

    pub fn blob_ref(&self, hash: &BlobHash) -> Result<BlobRef> {
        let meta = fs::metadata(self.blob_path(hash)).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::MissingBlob(hash.clone()),
            _ => StoreError::io(format!("reading blob {hash}"), e),
        })?;
        Ok(BlobRef {
            hash: hash.clone(),
            byte_size: meta.len(),
        })
    }

    pub fn stats(&self) -> Result<StoreStats> {
        let blobs = blob::list_blobs(&self.root).map_err(|e| StoreError::io("listing blobs", e))?;
        let days = journal::list_days(&self.root).map_err(|e| StoreError::io("listing journals", e))?;
        let mut journal_lines = 0u64;
        let mut journal_bytes = 0u64;
        for (_, path) in &days {
            let bytes = fs::read(path).map_err(|e| StoreError::io(format!("reading {}", path.display()), e))?;
            journal_bytes += bytes.len() as u64;
            journal_lines += bytes
                .split(|&b| b == b'\n')
                .filter(|l| !l.iter().all(u8::is_ascii_whitespace))
                .count() as u64;
        }
        let blob_count = blobs.len() as u64;
        Ok(StoreStats {
            blob_count,
            journal_days: days.len() as u64,
            total_bytes: blobs.iter().map(|(_, _, size)| size).sum(),
            dedup_ratio: if blob_count == 0 {
                1.0
            } else {
                journal_lines as f64 / blob_count as f64
            },
            journal_lines,
            journal_bytes,
        })
    }

    /// Copies a day's journal and every blob it references into `dest`, using
    /// the same layout, so `FrameStore::open(dest)` can read it back.
    pub fn export_day(&self, date: NaiveDate, dest: &Path) -> Result<ExportReport> {
        let src = self.journal_path(date);
        let bytes = match fs::read(&src) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NoSuchDay(date)),
            Err(e) => return Err(StoreError::io(format!("reading {}", src.display()), e)),
        };
        let mut refs = HashSet::new();
        journal::referenced_blobs(&bytes, &mut refs);

        let journal_dest = journal::journal_path(dest, date);
        let write = |path: &Path, data: &[u8]| {
            blob::write_atomically(path, data)
                .map_err(|e| StoreError::io(format!("writing {}", path.display()), e))
        };
        write(&journal_dest, &bytes)?;
        let mut refs: Vec<_> = refs.into_iter().collect();
        refs.sort();
        for hash in &refs {
            let data = self.read_blob(hash)?;
            write(&blob::blob_path(dest, hash), &data)?;
        }
        fs::create_dir_all(dest.join(blob::BLOB_DIR))
            .map_err(|e| StoreError::io("creating export blob dir", e))?;
        Ok(ExportReport {
            journal: journal_dest,
            blobs_copied: refs.len(),
        })
    }
}

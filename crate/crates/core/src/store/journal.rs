//! Per-day line-delimited journals under `journal/YYYY-MM-DD.jsonl`.

use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::{BlobHash, FrameRecord};

pub(crate) const JOURNAL_DIR: &str = "journal";
const JOURNAL_EXT: &str = "jsonl";

pub(crate) fn journal_path(root: &Path, date: NaiveDate) -> PathBuf {
    root.join(JOURNAL_DIR)
        .join(format!("{}.{JOURNAL_EXT}", date.format("%Y-%m-%d")))
}

pub(crate) fn append_line(path: &Path, record: &FrameRecord) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut line = serde_json::to_vec(record)?;
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&line)?;
    f.sync_data()
}

/// Outcome of parsing one journal file.
pub(crate) struct Parsed {
    pub records: Vec<FrameRecord>,
    pub skipped: usize,
    pub nonblank_lines: usize,
}

/// Parses every line of a journal. Lines that fail to parse, belong to
/// another day, or break timestamp order are skipped and counted.
pub(crate) fn parse(bytes: &[u8], date: NaiveDate) -> Parsed {
    let mut records: Vec<FrameRecord> = Vec::new();
    let mut skipped = 0;
    let mut nonblank_lines = 0;
    for line in bytes.split(|&b| b == b'\n') {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        nonblank_lines += 1;
        let record: FrameRecord = match serde_json::from_slice(line) {
            Ok(r) => r,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let in_order = records.last().is_none_or(|prev| record.ts > prev.ts);
        if record.ts.date_naive() != date || !in_order {
            skipped += 1;
            continue;
        }
        records.push(record);
    }
    Parsed {
        records,
        skipped,
        nonblank_lines,
    }
}

/// Blob hashes named by any line that parses as JSON, including lines that
/// fail full record validation. Used by GC and export, which must not lose a
/// blob a reader could still resolve.
pub(crate) fn referenced_blobs(bytes: &[u8], into: &mut HashSet<BlobHash>) {
    for line in bytes.split(|&b| b == b'\n') {
        let Ok(value) = serde_json::from_slice::<serde_json::Value>(line) else {
            continue;
        };
        if let Some(hash) = value
            .get("blob")
            .and_then(|b| b.as_str())
            .and_then(|s| s.parse().ok())
        {
            into.insert(hash);
        }
    }
}

/// Days with a journal file, ascending.
pub(crate) fn list_days(root: &Path) -> io::Result<Vec<(NaiveDate, PathBuf)>> {
    let dir = root.join(JOURNAL_DIR);
    let mut out = Vec::new();
    let entries = match fs::read_dir(&dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(e),
    };
    for entry in entries {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(JOURNAL_EXT) {
            continue;
        }
        let Some(date) = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok())
        else {
            continue;
        };
        out.push((date, path));
    }
    out.sort_by_key(|(d, _)| *d);
    Ok(out)
}

//! Navigating one day of history as a time-lapse.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::Timestamp;
use crate::registry::{AppCategory, Locator};
use crate::store::{BlobHash, DaySegment, FrameRecord, FrameStore, StoreError};

/// Playback rates offered by the player, in frames per second.
pub const PLAYBACK_SPEEDS: [u32; 5] = [1, 2, 5, 10, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct PlaybackSpeed(u32);

impl PlaybackSpeed {
    pub const DEFAULT: PlaybackSpeed = PlaybackSpeed(10);

    pub fn fps(self) -> u32 {
        self.0
    }
}

impl Default for PlaybackSpeed {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<u32> for PlaybackSpeed {
    type Error = TimelineError;

    fn try_from(fps: u32) -> Result<Self, Self::Error> {
        if PLAYBACK_SPEEDS.contains(&fps) {
            Ok(Self(fps))
        } else {
            Err(TimelineError::UnsupportedSpeed(fps))
        }
    }
}

impl From<PlaybackSpeed> for u32 {
    fn from(s: PlaybackSpeed) -> u32 {
        s.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimelineError {
    #[error("timeline is empty")]
    EmptyTimeline,
    #[error("index {index} out of range for timeline of {len} frames")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("scrub position {0} is outside [0, 1]")]
    BadFraction(f64),
    #[error("unsupported playback speed {0} fps; choose one of 1, 2, 5, 10, 20")]
    UnsupportedSpeed(u32),
    #[error("bad frame id {0:?}; expected <YYYY-MM-DD>/<index>")]
    BadFrameId(String),
}

/// Immutable snapshot of a day's records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timeline {
    pub date: NaiveDate,
    frames: Vec<FrameRecord>,
}

impl Timeline {
    pub fn new(date: NaiveDate, frames: Vec<FrameRecord>) -> Self {
        debug_assert!(frames.windows(2).all(|w| w[0].ts <= w[1].ts));
        Self { date, frames }
    }

    pub fn from_segment(segment: DaySegment) -> Self {
        Self::new(segment.date, segment.records)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn get(&self, index: usize) -> Result<&FrameRecord, TimelineError> {
        self.frames.get(index).ok_or(TimelineError::IndexOutOfRange {
            index,
            len: self.frames.len(),
        })
    }
}

/// Per-session playback position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineCursor {
    pub index: usize,
    pub len: usize,
    pub playing: bool,
    pub speed: PlaybackSpeed,
}

impl TimelineCursor {
    /// Paused at the most recent frame. `None` for an empty timeline.
    pub fn at_latest(len: usize) -> Option<Self> {
        (len > 0).then(|| Self {
            index: len - 1,
            len,
            playing: false,
            speed: PlaybackSpeed::DEFAULT,
        })
    }

    fn last(&self) -> usize {
        self.len - 1
    }

    /// Moves to `index`, clamped to the timeline.
    pub fn seek(self, index: usize) -> Self {
        Self {
            index: index.min(self.last()),
            ..self
        }
    }

    pub fn play(self) -> Self {
        Self {
            playing: self.index < self.last(),
            ..self
        }
    }

    pub fn pause(self) -> Self {
        Self {
            playing: false,
            ..self
        }
    }

    pub fn with_speed(self, speed: PlaybackSpeed) -> Self {
        Self { speed, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Prev,
    Next,
}

/// Loads `date` and places a cursor on its most recent frame.
pub fn open_timeline(store: &FrameStore, date: NaiveDate) -> Result<(Timeline, Option<TimelineCursor>), StoreError> {
    let timeline = Timeline::from_segment(store.read_day(date)?);
    let cursor = TimelineCursor::at_latest(timeline.len());
    Ok((timeline, cursor))
}

/// Index under a slider at `fraction` of its travel:
/// `round(fraction * (len - 1))`, halves rounded away from zero.
pub fn scrub(timeline: &Timeline, fraction: f64) -> Result<usize, TimelineError> {
    if timeline.is_empty() {
        return Err(TimelineError::EmptyTimeline);
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(TimelineError::BadFraction(fraction));
    }
    let last = (timeline.len() - 1) as f64;
    Ok((fraction * last).round() as usize)
}

/// One frame back or forward, clamped at both ends.
pub fn step(cursor: TimelineCursor, direction: Direction) -> TimelineCursor {
    let index = match direction {
        Direction::Prev => cursor.index.saturating_sub(1),
        Direction::Next => (cursor.index + 1).min(cursor.last()),
    };
    TimelineCursor { index, ..cursor }
}

/// Advances a playing cursor by `floor(elapsed * fps)` frames. Playback stops
/// on the last frame.
pub fn tick_playback(cursor: TimelineCursor, elapsed_s: f64) -> TimelineCursor {
    if !cursor.playing {
        return cursor;
    }
    let frames = (elapsed_s * f64::from(cursor.speed.fps())).floor();
    let advance = if frames.is_finite() && frames > 0.0 {
        frames as usize
    } else {
        0
    };
    let index = cursor.index.saturating_add(advance).min(cursor.last());
    TimelineCursor {
        index,
        playing: index < cursor.last(),
        ..cursor
    }
}

/// What the metadata panel shows for one frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameView {
    pub ts: Timestamp,
    pub app_id: String,
    pub app_name: String,
    pub category: AppCategory,
    pub label: String,
    /// URL, file path, or project root; empty when unknown.
    pub locator: String,
    /// Page title or file name when there is one.
    pub detail: String,
}

impl From<&FrameRecord> for FrameView {
    fn from(r: &FrameRecord) -> Self {
        let detail = match &r.locator {
            Locator::Web { title, .. } => title.clone(),
            Locator::File { name, .. } => name.clone(),
            _ => String::new(),
        };
        Self {
            ts: r.ts,
            app_id: r.app_id.clone(),
            app_name: r.app_name.clone(),
            category: r.category,
            label: r.label.clone(),
            locator: r.locator.target().to_owned(),
            detail,
        }
    }
}

pub fn frame_at(timeline: &Timeline, index: usize) -> Result<(BlobHash, FrameView), TimelineError> {
    let record = timeline.get(index)?;
    Ok((record.blob.clone(), FrameView::from(record)))
}

/// Addresses a frame as `<date>/<index>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FrameId {
    pub date: NaiveDate,
    pub index: usize,
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.date.format("%Y-%m-%d"), self.index)
    }
}

impl FromStr for FrameId {
    type Err = TimelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TimelineError::BadFrameId(s.to_owned());
        let (date, index) = s.split_once('/').ok_or_else(bad)?;
        Ok(Self {
            date: NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|_| bad())?,
            index: index.parse().map_err(|_| bad())?,
        })
    }
}

impl TryFrom<String> for FrameId {
    type Error = TimelineError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FrameId> for String {
    fn from(id: FrameId) -> String {
        id.to_string()
    }
}

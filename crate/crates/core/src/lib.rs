//! Local visual history of a computer screen.
//!
//! Frames are captured on a fixed interval (and on application switches),
//! paired with metadata about the frontmost application, and stored as
//! content-addressed JPEGs plus one append-only journal per day. A day can be
//! replayed as a time-lapse, and any frame turned back into the URL, file,
//! folder, or project it showed.

pub mod capture;
pub mod config;
pub mod registry;
pub mod retrieval;
pub mod store;
pub mod timeline;

pub use capture::{
    AppSnapshot, CaptureTrigger, FrameSink, FrameSource, MetadataProvider, RawFrame, SharedCategoryMap, Timestamp,
};
pub use config::{validate_config, CaptureConfig, ConfigError};
pub use registry::{classify, extract_locator, load_category_map, AppCategory, CategoryMap, Locator};
pub use retrieval::{derive_action, derive_folder_action, execute, ActionKind, Launcher, RetrievalAction};
pub use store::{estimate_disk, BlobHash, DaySegment, FrameMeta, FrameRecord, FrameStore, GcReport, RetentionPolicy, StoreStats};
pub use timeline::{frame_at, open_timeline, scrub, step, tick_playback, FrameId, Timeline, TimelineCursor};

use std::sync::Arc;

use chrono::{DateTime, NaiveDate, TimeDelta};
use lapse_core::capture::{run_capture_loop, ScriptedClock, ScriptedProvider, StopSignal, SyntheticSource};
use lapse_core::retrieval::RecordingLauncher;
use lapse_core::timeline::Direction;
use lapse_core::{
    derive_action, execute, frame_at, open_timeline, scrub, step, ActionKind, AppCategory, AppSnapshot, CaptureConfig,
    CategoryMap, FrameStore, SharedCategoryMap,
};

#[test]
fn capture_store_replay_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let store = FrameStore::open(dir.path()).unwrap();
    let cfg = CaptureConfig {
        interval_s: 5,
        ..CaptureConfig::new(dir.path())
    };
    let mut source = SyntheticSource::from_keys(2, 640, 480, &[1, 1, 2, 2, 3, 3]).with_scale(cfg.scale);
    let provider = ScriptedProvider::always(
        AppSnapshot::app("com.google.Chrome", "Chrome").with_url("https://example.org/x", "X"),
    );
    let start = DateTime::parse_from_rfc3339("2024-05-20T14:00:00+02:00").unwrap();
    let mut clock = ScriptedClock::new(start, TimeDelta::seconds(30));
    let summary = run_capture_loop(
        &cfg,
        &mut source,
        Arc::new(provider),
        &SharedCategoryMap::new(CategoryMap::builtin()),
        &store,
        &mut clock,
        &StopSignal::new(),
    )
    .unwrap();
    assert_eq!(summary.records, 6);

    let stats = store.stats().unwrap();
    assert_eq!((stats.blob_count, stats.journal_lines), (3, 6));

    let (timeline, cursor) = open_timeline(&store, NaiveDate::from_ymd_opt(2024, 5, 20).unwrap()).unwrap();
    let cursor = cursor.unwrap();
    assert_eq!(cursor.index, 5);
    assert_eq!(step(cursor, Direction::Next).index, 5);
    assert_eq!(scrub(&timeline, 0.0).unwrap(), 0);

    let (hash, view) = frame_at(&timeline, cursor.index).unwrap();
    assert_eq!(view.category, AppCategory::WebBrowser);
    assert_eq!(view.label, "Page URL");
    assert!(store.read_blob(&hash).unwrap().starts_with(&[0xFF, 0xD8]));

    let launcher = RecordingLauncher::new();
    let action = derive_action(timeline.get(cursor.index).unwrap());
    execute(&action, &launcher).unwrap();
    assert_eq!(launcher.log(), vec![action.clone()]);
    assert_eq!(action.kind, ActionKind::OpenUrl);
    assert_eq!(action.target, "https://example.org/x");
}

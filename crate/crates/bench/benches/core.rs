use chrono::{DateTime, Duration, NaiveDate};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use lapse_core::capture::SyntheticSource;
use lapse_core::{
    classify, estimate_disk, scrub, step, AppSnapshot, CaptureConfig, CaptureTrigger, CategoryMap, FrameMeta,
    FrameRecord, FrameSource, FrameStore, Timeline, TimelineCursor,
};
use lapse_core::timeline::Direction;
use std::hint::black_box;

fn start() -> lapse_core::Timestamp {
    DateTime::parse_from_rfc3339("2024-06-01T09:00:00+00:00").unwrap()
}

fn bench_append(c: &mut Criterion) {
    let mut group = c.benchmark_group("append");
    group.sample_size(20);
    let meta = FrameMeta::classify(
        &CategoryMap::builtin(),
        &AppSnapshot::app("org.mozilla.firefox", "Firefox").with_url("https://example.org", "Example"),
    );
    for (name, changing) in [("duplicate", false), ("unique", true)] {
        group.bench_function(name, |b| {
            b.iter_batched(
                || {
                    let dir = tempfile::tempdir().unwrap();
                    let store = FrameStore::open(dir.path()).unwrap();
                    let cfg = CaptureConfig {
                        scale: 0.5,
                        ..CaptureConfig::new(dir.path())
                    };
                    let keys: Vec<u64> = (0..32).map(|i| if changing { i } else { 0 }).collect();
                    let mut src = SyntheticSource::from_keys(7, 1440, 1080, &keys).with_scale(cfg.scale);
                    let frames: Vec<_> = (0..32)
                        .map(|i| src.next_frame(start() + Duration::seconds(i * 10)).unwrap())
                        .collect();
                    (dir, store, cfg, frames)
                },
                |(_dir, store, cfg, frames)| {
                    for f in &frames {
                        store.append(f, &meta, CaptureTrigger::Interval, &cfg).unwrap();
                    }
                },
                BatchSize::PerIteration,
            );
        });
    }
    group.finish();
}

fn bench_classify(c: &mut Criterion) {
    let map = CategoryMap::builtin();
    let ids = ["org.mozilla.firefox", "com.microsoft.Word", "com.jetbrains.intellij", "com.example.unknown"];
    c.bench_function("classify", |b| {
        b.iter(|| {
            for id in ids {
                black_box(classify(&map, black_box(id)));
            }
        })
    });
}

fn bench_timeline(c: &mut Criterion) {
    let date = NaiveDate::from_ymd_opt(2024, 6, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = FrameStore::open(dir.path()).unwrap();
    let cfg = CaptureConfig::new(dir.path());
    let mut src = SyntheticSource::static_screen(1, 400, 320);
    let frame = src.next_frame(start()).unwrap();
    let rec: FrameRecord = store
        .append(&frame, &FrameMeta::no_metadata(), CaptureTrigger::Interval, &cfg)
        .unwrap();
    let frames: Vec<FrameRecord> = (0..100_000)
        .map(|i| FrameRecord {
            ts: rec.ts + Duration::milliseconds(i),
            ..rec.clone()
        })
        .collect();
    let timeline = Timeline::new(date, frames);
    c.bench_function("scrub", |b| b.iter(|| scrub(&timeline, black_box(0.37)).unwrap()));
    let cursor = TimelineCursor::at_latest(timeline.len()).unwrap();
    c.bench_function("step", |b| b.iter(|| step(black_box(cursor), Direction::Prev)));
}

fn bench_estimate(c: &mut Criterion) {
    let cfg = CaptureConfig::new("/tmp");
    c.bench_function("estimate", |b| b.iter(|| estimate_disk(&cfg, 1440, 1080, black_box(80.0))));
}

criterion_group!(benches, bench_append, bench_classify, bench_timeline, bench_estimate);
criterion_main!(benches);

use std::collections::HashSet;

use chrono::DateTime;
use proptest::prelude::*;

use super::*;
use crate::registry::{AppCategory, Locator};

const W: u32 = 400;
const H: u32 = 320;

fn t0() -> Timestamp {
    DateTime::parse_from_rfc3339("2024-03-01T09:00:00+01:00").unwrap()
}

fn cfg(interval_s: u32) -> CaptureConfig {
    CaptureConfig {
        interval_s,
        ..CaptureConfig::new("/unused")
    }
}

fn browser() -> AppSnapshot {
    AppSnapshot::app("com.google.Chrome", "Chrome").with_url("https://a.test/x", "X")
}

struct Run {
    summary: LoopSummary,
    records: Vec<FrameRecord>,
}

fn run(cfg: &CaptureConfig, source: &mut SyntheticSource, provider: impl MetadataProvider + 'static, clock: &mut dyn Clock) -> Run {
    let sink = MemorySink::new();
    let categories = SharedCategoryMap::new(CategoryMap::builtin());
    let summary = CaptureLoop {
        cfg: cfg.clone(),
        source,
        provider: Arc::new(provider),
        categories: &categories,
        sink: &sink,
        provider_timeout: Duration::from_millis(200),
    }
    .run(clock, &StopSignal::new())
    .unwrap();
    Run {
        summary,
        records: sink.records(),
    }
}

#[test]
fn one_record_per_tick_in_order() {
    let mut src = SyntheticSource::from_keys(1, W, H, &[1, 2, 3, 4, 5, 6]);
    let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(6));
    let out = run(&cfg(1), &mut src, ScriptedProvider::always(browser()), &mut clock);
    assert_eq!(out.records.len(), 6);
    assert!(out.records.windows(2).all(|w| w[0].ts < w[1].ts));
    let blobs: HashSet<_> = out.records.iter().map(|r| &r.blob).collect();
    assert_eq!(blobs.len(), 6);
    assert!(out.records.iter().all(|r| r.trigger == CaptureTrigger::Interval));
    assert_eq!(out.records[0].ts, t0());
    assert_eq!(out.records[5].ts, t0() + TimeDelta::seconds(5));
}

#[test]
fn static_screen_shares_one_blob() {
    let mut src = SyntheticSource::static_screen(2, W, H);
    let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(100));
    let out = run(&cfg(10), &mut src, NullProvider, &mut clock);
    assert_eq!(out.records.len(), 10);
    let blobs: HashSet<_> = out.records.iter().map(|r| &r.blob).collect();
    assert_eq!(blobs.len(), 1);
}

#[test]
fn app_switch_between_ticks_adds_a_record() {
    let mut src = SyntheticSource::from_keys(3, W, H, &[1, 2, 3]);
    let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(20))
        .with_app_switches([TimeDelta::seconds(5)]);
    let out = run(&cfg(10), &mut src, ScriptedProvider::always(browser()), &mut clock);
    let triggers: Vec<_> = out.records.iter().map(|r| r.trigger).collect();
    assert_eq!(
        triggers,
        [CaptureTrigger::Interval, CaptureTrigger::AppSwitch, CaptureTrigger::Interval]
    );
    assert_eq!(out.records[1].ts, t0() + TimeDelta::seconds(5));
    assert_eq!(out.summary.app_switch_captures, 1);
}

#[test]
fn app_switch_ignored_when_disabled() {
    let mut src = SyntheticSource::static_screen(3, W, H);
    let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(20))
        .with_app_switches([TimeDelta::seconds(5)]);
    let c = CaptureConfig {
        capture_on_app_switch: false,
        ..cfg(10)
    };
    let out = run(&c, &mut src, NullProvider, &mut clock);
    assert_eq!(out.records.len(), 2);
    assert!(out.records.iter().all(|r| r.trigger == CaptureTrigger::Interval));
}

#[test]
fn debounce_rules() {
    let mut src = SyntheticSource::static_screen(4, W, H);
    // switches at 4.0 and 4.2 s: second is within 500 ms of the first.
    // switch at 9.7 s: the 10 s tick falls 300 ms later and is skipped.
    // switch at 15.0 s then tick at 20 s: far apart, both captured.
    let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(25)).with_app_switches([
        TimeDelta::milliseconds(4000),
        TimeDelta::milliseconds(4200),
        TimeDelta::milliseconds(9700),
        TimeDelta::milliseconds(15000),
    ]);
    let out = run(&cfg(10), &mut src, NullProvider, &mut clock);
    let got: Vec<_> = out
        .records
        .iter()
        .map(|r| ((r.ts - t0()).num_milliseconds(), r.trigger))
        .collect();
    use CaptureTrigger::*;
    assert_eq!(
        got,
        [(0, Interval), (4000, AppSwitch), (9700, AppSwitch), (15000, AppSwitch), (20000, Interval)]
    );
    assert_eq!(out.summary.debounced, 2);
}

#[test]
fn provider_failure_never_suppresses_frames() {
    let healthy = {
        let mut src = SyntheticSource::from_keys(5, W, H, &[1, 2, 3]);
        let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(30));
        run(&cfg(5), &mut src, ScriptedProvider::always(browser()), &mut clock)
    };
    let failing = {
        let mut src = SyntheticSource::from_keys(5, W, H, &[1, 2, 3]);
        let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(30));
        run(&cfg(5), &mut src, ScriptedProvider::failing(), &mut clock)
    };
    assert_eq!(healthy.records.len(), 6);
    assert_eq!(failing.records.len(), healthy.records.len());
    for r in &failing.records {
        assert_eq!(r.category, AppCategory::NoMetadata);
        assert_eq!(r.locator, Locator::None);
        assert_eq!(r.label, "Application");
    }
    assert!(healthy.records.iter().all(|r| r.category == AppCategory::WebBrowser));
}

#[test]
fn hung_provider_does_not_stall_capture() {
    let mut src = SyntheticSource::static_screen(6, W, H);
    let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(3));
    let provider = ScriptedProvider::new(vec![ProviderStep::Hang(
        Duration::from_secs(5),
        browser(),
    )]);
    let started = std::time::Instant::now();
    let sink = MemorySink::new();
    let categories = SharedCategoryMap::new(CategoryMap::builtin());
    CaptureLoop {
        cfg: cfg(1),
        source: &mut src,
        provider: Arc::new(provider),
        categories: &categories,
        sink: &sink,
        provider_timeout: Duration::from_millis(30),
    }
    .run(&mut clock, &StopSignal::new())
    .unwrap();
    assert!(started.elapsed() < Duration::from_secs(2));
    assert_eq!(sink.records().len(), 3);
    assert!(sink.records().iter().all(|r| r.category == AppCategory::NoMetadata));
}

#[test]
fn unavailable_source_skips_tick() {
    let mut src = SyntheticSource::new(
        7,
        W,
        H,
        vec![ScriptFrame::Show(1), ScriptFrame::Unavailable, ScriptFrame::Show(2)],
    );
    let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(3));
    let out = run(&cfg(1), &mut src, NullProvider, &mut clock);
    assert_eq!(out.records.len(), 2);
    assert_eq!(out.summary.source_unavailable, 1);
}

struct FullSink;

impl FrameSink for FullSink {
    fn append(&self, _: &RawFrame, _: &FrameMeta, _: CaptureTrigger, _: &CaptureConfig) -> Result<FrameRecord, SinkError> {
        Err(SinkError::Full("disk full".into()))
    }
}

#[test]
fn full_sink_halts_loop() {
    let mut src = SyntheticSource::static_screen(8, W, H);
    let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(10));
    let categories = SharedCategoryMap::default();
    let err = run_capture_loop(
        &cfg(1),
        &mut src,
        Arc::new(NullProvider),
        &categories,
        &FullSink,
        &mut clock,
        &StopSignal::new(),
    )
    .unwrap_err();
    assert!(matches!(err, CaptureError::SinkFull(_)));
}

#[test]
fn invalid_config_refuses_to_start() {
    let mut src = SyntheticSource::static_screen(8, 1920, 1080);
    let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(10));
    let c = CaptureConfig {
        scale: 0.2,
        ..cfg(1)
    };
    let err = run_capture_loop(
        &c,
        &mut src,
        Arc::new(NullProvider),
        &SharedCategoryMap::default(),
        &MemorySink::new(),
        &mut clock,
        &StopSignal::new(),
    )
    .unwrap_err();
    assert!(matches!(err, CaptureError::Config(ConfigError::FrameTooSmall { .. })));
}

#[test]
fn stop_signal_ends_run() {
    let stop = StopSignal::new();
    stop.stop();
    let mut src = SyntheticSource::static_screen(8, W, H);
    let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(10));
    let sink = MemorySink::new();
    let summary = run_capture_loop(
        &cfg(1),
        &mut src,
        Arc::new(NullProvider),
        &SharedCategoryMap::default(),
        &sink,
        &mut clock,
        &stop,
    )
    .unwrap();
    assert_eq!(summary.records, 0);
}

/// Virtual clock whose wall time jumps back five seconds after the third wait.
struct RegressingClock {
    virtual_now: Timestamp,
    waits: u32,
}

impl Clock for RegressingClock {
    fn now(&self) -> Timestamp {
        if self.waits >= 3 {
            self.virtual_now - TimeDelta::seconds(5)
        } else {
            self.virtual_now
        }
    }

    fn wait_until(&mut self, deadline: Timestamp) -> Wake {
        self.waits += 1;
        if self.waits > 6 {
            return Wake::Stop;
        }
        self.virtual_now = self.virtual_now.max(deadline);
        Wake::Deadline
    }
}

#[test]
fn wall_clock_regression_keeps_order() {
    let mut src = SyntheticSource::static_screen(9, W, H);
    let mut clock = RegressingClock {
        virtual_now: t0(),
        waits: 0,
    };
    let out = run(&cfg(1), &mut src, NullProvider, &mut clock);
    assert_eq!(out.records.len(), 6);
    assert!(out.records.windows(2).all(|w| w[0].ts < w[1].ts));
    let offsets: Vec<_> = out
        .records
        .iter()
        .map(|r| (r.ts - t0()).num_milliseconds())
        .collect();
    assert_eq!(offsets, [0, 1000, 1001, 1002, 1003, 1004]);
}

#[test]
fn monotonic_stamp_cases() {
    let t = t0();
    assert_eq!(monotonic_stamp(t, None), t);
    assert_eq!(monotonic_stamp(t, Some(t - TimeDelta::seconds(1))), t);
    assert_eq!(monotonic_stamp(t, Some(t)), t + TimeDelta::milliseconds(1));
    assert_eq!(
        monotonic_stamp(t - TimeDelta::seconds(9), Some(t)),
        t + TimeDelta::milliseconds(1)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cadence_matches_run_length(interval in 1u32..=60, run_s in 1i64..180) {
        let mut src = SyntheticSource::static_screen(10, W, H);
        let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(run_s));
        let out = run(&cfg(interval), &mut src, NullProvider, &mut clock);
        let expected = run_s / i64::from(interval);
        let got = out.records.len() as i64;
        prop_assert!((got - expected).abs() <= 1, "got {got}, floor {expected}");
    }

    #[test]
    fn blobs_never_exceed_distinct_screens(keys in prop::collection::vec(0u64..5, 1..20)) {
        let mut oracle_src = SyntheticSource::from_keys(11, W, H, &keys);
        let distinct_pixels: HashSet<_> = keys
            .iter()
            .map(|&k| pixel_digest(&oracle_src.pixels_for(k)))
            .collect();
        let mut src = SyntheticSource::from_keys(11, W, H, &keys);
        let mut clock = ScriptedClock::new(t0(), TimeDelta::seconds(keys.len() as i64));
        let out = run(&cfg(1), &mut src, NullProvider, &mut clock);
        let blobs: HashSet<_> = out.records.iter().map(|r| r.blob.clone()).collect();
        prop_assert_eq!(out.records.len(), keys.len());
        prop_assert!(blobs.len() <= distinct_pixels.len());
    }
}

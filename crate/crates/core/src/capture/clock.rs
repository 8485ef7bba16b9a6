use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, FixedOffset, Local, TimeDelta};

pub type Timestamp = DateTime<FixedOffset>;

/// Why [`Clock::wait_until`] returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wake {
    Deadline,
    AppSwitch,
    Stop,
}

/// Time and event source driving the capture loop.
pub trait Clock {
    fn now(&self) -> Timestamp;

    /// Blocks until `deadline`, an app-switch event, or a stop request,
    /// whichever comes first.
    fn wait_until(&mut self, deadline: Timestamp) -> Wake;
}

/// Cross-thread stop request, honoured at the next tick boundary.
#[derive(Debug, Clone, Default)]
pub struct StopSignal(Arc<AtomicBool>);

impl StopSignal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stop(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_stopped(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

/// Wall clock in the local zone. App-switch notifications arrive on an
/// optional channel fed by a platform adapter.
pub struct SystemClock {
    switches: Option<Receiver<()>>,
    stop: StopSignal,
}

const STOP_POLL: Duration = Duration::from_millis(100);

impl SystemClock {
    pub fn new(stop: StopSignal) -> Self {
        Self {
            switches: None,
            stop,
        }
    }

    pub fn with_app_switches(mut self, rx: Receiver<()>) -> Self {
        self.switches = Some(rx);
        self
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Local::now().fixed_offset()
    }

    fn wait_until(&mut self, deadline: Timestamp) -> Wake {
        loop {
            if self.stop.is_stopped() {
                return Wake::Stop;
            }
            let remaining = match (deadline - self.now()).to_std() {
                Ok(d) if !d.is_zero() => d,
                _ => return Wake::Deadline,
            };
            let slice = remaining.min(STOP_POLL);
            match &self.switches {
                Some(rx) => match rx.recv_timeout(slice) {
                    Ok(()) => return Wake::AppSwitch,
                    Err(RecvTimeoutError::Timeout) => {}
                    Err(RecvTimeoutError::Disconnected) => self.switches = None,
                },
                None => std::thread::sleep(slice),
            }
        }
    }
}

/// Virtual clock for deterministic runs: time jumps straight to each deadline
/// or scripted app-switch, and the run stops at `end`.
#[derive(Debug, Clone)]
pub struct ScriptedClock {
    now: Timestamp,
    end: Timestamp,
    switches: VecDeque<Timestamp>,
}

impl ScriptedClock {
    pub fn new(start: Timestamp, run_for: TimeDelta) -> Self {
        Self {
            now: start,
            end: start + run_for,
            switches: VecDeque::new(),
        }
    }

    /// Adds app-switch events at the given offsets from the start.
    pub fn with_app_switches(mut self, offsets: impl IntoIterator<Item = TimeDelta>) -> Self {
        let start = self.now;
        let mut at: Vec<_> = offsets.into_iter().map(|o| start + o).collect();
        at.sort();
        self.switches = at.into();
        self
    }
}

impl Clock for ScriptedClock {
    fn now(&self) -> Timestamp {
        self.now
    }

    fn wait_until(&mut self, deadline: Timestamp) -> Wake {
        if let Some(&at) = self.switches.front() {
            if at <= deadline && at < self.end {
                self.switches.pop_front();
                self.now = self.now.max(at);
                return Wake::AppSwitch;
            }
        }
        if deadline >= self.end {
            self.now = self.end;
            return Wake::Stop;
        }
        self.now = self.now.max(deadline);
        Wake::Deadline
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t0() -> Timestamp {
        DateTime::parse_from_rfc3339("2024-03-01T09:00:00+01:00").unwrap()
    }

    #[test]
    fn scripted_clock_jumps_and_stops() {
        let mut c = ScriptedClock::new(t0(), TimeDelta::seconds(3))
            .with_app_switches([TimeDelta::milliseconds(1500)]);
        assert_eq!(c.wait_until(t0() + TimeDelta::seconds(1)), Wake::Deadline);
        assert_eq!(c.now(), t0() + TimeDelta::seconds(1));
        assert_eq!(c.wait_until(t0() + TimeDelta::seconds(2)), Wake::AppSwitch);
        assert_eq!(c.now(), t0() + TimeDelta::milliseconds(1500));
        assert_eq!(c.wait_until(t0() + TimeDelta::seconds(2)), Wake::Deadline);
        assert_eq!(c.wait_until(t0() + TimeDelta::seconds(3)), Wake::Stop);
    }

    #[test]
    fn system_clock_honours_stop() {
        let stop = StopSignal::new();
        let mut c = SystemClock::new(stop.clone());
        stop.stop();
        let far = c.now() + TimeDelta::hours(1);
        assert_eq!(c.wait_until(far), Wake::Stop);
    }

    #[test]
    fn system_clock_delivers_switch() {
        let (tx, rx) = std::sync::mpsc::channel();
        let mut c = SystemClock::new(StopSignal::new()).with_app_switches(rx);
        tx.send(()).unwrap();
        let far = c.now() + TimeDelta::seconds(30);
        assert_eq!(c.wait_until(far), Wake::AppSwitch);
        let past = c.now() - TimeDelta::seconds(1);
        assert_eq!(c.wait_until(past), Wake::Deadline);
    }
}

//! Append-only per-session event log with cursor reads.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

pub trait Clock: Send + Sync {
    fn name(&self) -> &str;
    /// Milliseconds; only monotonicity matters to the log.
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn name(&self) -> &str {
        "system"
    }

    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
    }
}

/// Ticks once per reading, for reproducible logs.
#[derive(Debug, Default)]
pub struct LogicalClock {
    ticks: AtomicU64,
}

impl Clock for LogicalClock {
    fn name(&self) -> &str {
        "logical"
    }

    fn now_ms(&self) -> u64 {
        self.ticks.fetch_add(1, Ordering::SeqCst)
    }
}

type ClockFactory = Arc<dyn Fn() -> Arc<dyn Clock> + Send + Sync>;

#[derive(Clone, Default)]
pub struct ClockRegistry {
    factories: BTreeMap<String, ClockFactory>,
}

impl ClockRegistry {
    pub fn standard() -> Self {
        let mut r = Self::default();
        r.register("system", || Arc::new(SystemClock));
        r.register("logical", || Arc::new(LogicalClock::default()));
        r
    }

    pub fn register(&mut self, name: &str, factory: impl Fn() -> Arc<dyn Clock> + Send + Sync + 'static) {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn create(&self, name: &str) -> Option<Arc<dyn Clock>> {
        self.factories.get(name).map(|f| f())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    UserInput,
    QueryAnswer,
    Plan,
    Code,
    ExecutionStarted,
    Signal,
    Error,
    Done,
    StatePatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub kind: EventKind,
    pub payload: Json,
    pub timestamp_ms: u64,
}

pub struct EventLog {
    events: Mutex<Vec<Arc<Event>>>,
    grew: Condvar,
    clock: Arc<dyn Clock>,
}

impl EventLog {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self {
            events: Mutex::default(),
            grew: Condvar::new(),
            clock,
        }
    }

    /// Append and return the new sequence number (the first is 1).
    pub fn append(&self, kind: EventKind, payload: Json) -> u64 {
        let mut events = self.events.lock().expect("event log poisoned");
        let seq = events.len() as u64 + 1;
        events.push(Arc::new(Event {
            seq,
            kind,
            payload,
            timestamp_ms: self.clock.now_ms(),
        }));
        self.grew.notify_all();
        seq
    }

    pub fn len(&self) -> usize {
        self.events.lock().expect("event log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn last_seq(&self) -> u64 {
        self.len() as u64
    }

    /// Events with `seq > since`.
    pub fn since(&self, since: u64) -> Vec<Event> {
        let events = self.events.lock().expect("event log poisoned");
        events.iter().skip(since as usize).map(|e| Event::clone(e)).collect()
    }

    /// Like [`EventLog::since`], but waits up to `timeout` for something new.
    pub fn wait_since(&self, since: u64, timeout: Duration) -> Vec<Event> {
        let deadline = Instant::now() + timeout;
        let mut events = self.events.lock().expect("event log poisoned");
        while events.len() as u64 <= since {
            let now = Instant::now();
            if now >= deadline {
                return Vec::new();
            }
            events = self.grew.wait_timeout(events, deadline - now).expect("event log poisoned").0;
        }
        events.iter().skip(since as usize).map(|e| Event::clone(e)).collect()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.since(0)
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
            .collect()
    }
}

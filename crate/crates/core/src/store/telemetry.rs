use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{LockOptions, StoreHandle, StoreKind};
use crate::contract::builtin;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    pub ts: i64,
    pub endpoint: String,
    pub latency_ms: f64,
    pub status: u16,
}

/// Long-lived telemetry writer. Failures never reach the caller; they are
/// counted instead.
#[derive(Debug)]
pub struct TelemetrySink {
    handle: Mutex<Option<StoreHandle>>,
    dropped: AtomicU64,
    recorded: AtomicU64,
}

impl TelemetrySink {
    /// Open for append; an unopenable store yields a sink that only drops.
    pub fn open(path: impl Into<PathBuf>, opts: LockOptions) -> Self {
        let handle = StoreHandle::open_append(path, StoreKind::Telemetry, builtin::telemetry_event(), opts).ok();
        Self::from_handle(handle)
    }

    pub fn from_handle(handle: Option<StoreHandle>) -> Self {
        Self { handle: Mutex::new(handle), dropped: AtomicU64::new(0), recorded: AtomicU64::new(0) }
    }

    pub fn disabled() -> Self {
        Self::from_handle(None)
    }

    pub fn record(&self, event: &TelemetryEvent) {
        let ok = match self.handle.lock() {
            Ok(mut guard) => match guard.as_mut() {
                Some(h) => h.append(std::slice::from_ref(event)).is_ok(),
                None => false,
            },
            Err(_) => false,
        };
        let counter = if ok { &self.recorded } else { &self.dropped };
        counter.fetch_add(1, Ordering::Relaxed);
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    pub fn recorded(&self) -> u64 {
        self.recorded.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{DataDir, ScanFilter};

    fn event(i: i64) -> TelemetryEvent {
        TelemetryEvent { ts: 1_700_000_000 + i, endpoint: "GET /api/v1/health".into(), latency_ms: i as f64 * 0.5, status: 200 }
    }

    #[test]
    fn hundred_events_in_order() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = DataDir::new(tmp.path());
        let sink = TelemetrySink::open(dir.path(StoreKind::Telemetry), LockOptions::default());
        for i in 0..100 {
            sink.record(&event(i));
        }
        assert_eq!((sink.recorded(), sink.dropped()), (100, 0));
        let got: Vec<TelemetryEvent> = dir.open_read(StoreKind::Telemetry).unwrap().scan(&ScanFilter::all()).unwrap().typed().unwrap();
        assert_eq!(got, (0..100).map(event).collect::<Vec<_>>());
    }

    #[test]
    fn unwritable_store_counts_drops() {
        let tmp = tempfile::tempdir().unwrap();
        let blocker = tmp.path().join("not-a-dir");
        std::fs::write(&blocker, b"x").unwrap();
        let sink = TelemetrySink::open(blocker.join("telemetry.jsonl"), LockOptions::default());
        sink.record(&event(1));
        sink.record(&event(2));
        assert_eq!(sink.dropped(), 2);
    }

    #[test]
    fn invalid_event_is_dropped_not_raised() {
        let tmp = tempfile::tempdir().unwrap();
        let sink = TelemetrySink::open(tmp.path().join("telemetry.jsonl"), LockOptions::default());
        sink.record(&TelemetryEvent { status: 42, ..event(1) });
        assert_eq!(sink.dropped(), 1);
    }
}

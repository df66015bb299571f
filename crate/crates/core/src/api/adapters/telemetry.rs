use std::sync::Mutex;

use crate::api::core::ports::TelemetryPort;
use crate::store::{TelemetryEvent, TelemetrySink};

/// Writes to the Telemetry Store.
#[derive(Debug)]
pub struct StoreTelemetry {
    sink: TelemetrySink,
}

impl StoreTelemetry {
    pub fn new(sink: TelemetrySink) -> Self {
        Self { sink }
    }

    pub fn sink(&self) -> &TelemetrySink {
        &self.sink
    }
}

impl TelemetryPort for StoreTelemetry {
    fn record(&self, ts: i64, endpoint: &str, latency_ms: f64, status: u16) {
        self.sink.record(&TelemetryEvent { ts, endpoint: endpoint.to_string(), latency_ms, status });
    }
}

#[derive(Debug, Default)]
pub struct MemoryTelemetry {
    events: Mutex<Vec<TelemetryEvent>>,
}

impl MemoryTelemetry {
    pub fn events(&self) -> Vec<TelemetryEvent> {
        self.events.lock().unwrap().clone()
    }
}

impl TelemetryPort for MemoryTelemetry {
    fn record(&self, ts: i64, endpoint: &str, latency_ms: f64, status: u16) {
        self.events.lock().unwrap().push(TelemetryEvent { ts, endpoint: endpoint.to_string(), latency_ms, status });
    }
}

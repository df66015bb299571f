//! Governance report over the Telemetry Store.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;

use super::{CliError, Ctx, Outcome};
use crate::pipelines::features::nearest_rank;
use crate::store::{ScanFilter, StoreKind, TelemetryEvent};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointStats {
    pub endpoint: String,
    pub count: usize,
    /// Responses with status 400 or above.
    pub errors: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

/// Per-endpoint summary of events with `from <= ts <= to`, by endpoint
/// name. Percentiles are nearest-rank.
pub fn aggregate(events: &[TelemetryEvent], from: Option<i64>, to: Option<i64>) -> Vec<EndpointStats> {
    let mut groups: BTreeMap<&str, Vec<&TelemetryEvent>> = BTreeMap::new();
    for e in events {
        if from.is_some_and(|f| e.ts < f) || to.is_some_and(|t| e.ts > t) {
            continue;
        }
        groups.entry(e.endpoint.as_str()).or_default().push(e);
    }
    groups
        .into_iter()
        .map(|(endpoint, group)| {
            let mut latencies: Vec<f64> = group.iter().map(|e| e.latency_ms).collect();
            EndpointStats {
                endpoint: endpoint.to_string(),
                count: group.len(),
                errors: group.iter().filter(|e| e.status >= 400).count(),
                p50_ms: nearest_rank(&mut latencies, 0.5).unwrap_or(0.0),
                p95_ms: nearest_rank(&mut latencies, 0.95).unwrap_or(0.0),
            }
        })
        .collect()
}

pub(crate) fn run(ctx: &mut Ctx, from: Option<i64>, to: Option<i64>) -> Result<Outcome, CliError> {
    if let (Some(f), Some(t)) = (from, to) {
        if f > t {
            return Err(CliError::Usage(format!("--from {f} is after --to {t}")));
        }
    }
    let scan = ctx.dir.open_read(StoreKind::Telemetry).and_then(|h| h.scan(&ScanFilter::all())).map_err(CliError::domain)?;
    let skipped = scan.skipped();
    let events: Vec<TelemetryEvent> = scan.typed().map_err(CliError::domain)?;
    let stats = aggregate(&events, from, to);
    let mut lines = vec!["endpoint\tcount\terrors\tp50_ms\tp95_ms".to_string()];
    for s in &stats {
        lines.push(format!("{}\t{}\t{}\t{:.3}\t{:.3}", s.endpoint, s.count, s.errors, s.p50_ms, s.p95_ms));
    }
    let total: usize = stats.iter().map(|s| s.count).sum();
    lines.push(format!("{total} request(s) over {} endpoint(s); {skipped} unreadable line(s) skipped", stats.len()));
    Ok(Outcome::ok(lines, json!({ "from": from, "to": to, "endpoints": stats, "total": total, "skipped": skipped })))
}

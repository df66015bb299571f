//! Data acquisition from providers, physical sensors and crawlers into the
//! Raw Data and Label stores.

mod crawler;
mod labels;
mod sensor;

pub use crawler::{crawl_source, provider_object_type, CrawlOutcome, Fetcher, FixtureFetcher, StaticFetcher};
pub use labels::{check_labels, ingest_provider_labels, label_entries, LabelBatch, RejectedEntry};
pub use sensor::{destination, normalize_lon, simulate_sensor_batch, simulate_tracks, SimConfig, SimTrack};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::contract::{builtin, validate_value, Violation, ViolationKind};
use crate::domain::{GeoFix, Label, MarineObject, Source};
use crate::store::{DataDir, LockOptions, MetadataRecord, StoreError, StoreHandle, StoreKind};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport failure for source {source_id}: {message}")]
    Transport { source_id: String, message: String },
    #[error("unparseable payload: {0}")]
    Format(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl IngestError {
    /// Transport failures may succeed on a later cycle.
    pub fn is_retriable(&self) -> bool {
        matches!(self, IngestError::Transport { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Provider,
    Sensor,
    Crawler,
}

impl SourceKind {
    pub fn source(&self) -> Source {
        match self {
            SourceKind::Provider => Source::Provider,
            SourceKind::Sensor => Source::Sensor,
            SourceKind::Crawler => Source::Crawler,
        }
    }
}

fn default_poll() -> u64 {
    60
}

fn default_true() -> bool {
    true
}

fn default_objects() -> usize {
    5
}

fn default_duration() -> i64 {
    3_600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub id: String,
    pub kind: SourceKind,
    /// Fetcher-relative location for provider and crawler sources.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Simulator seed for sensor sources.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_poll")]
    pub poll_interval_s: u64,
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_objects")]
    pub objects: usize,
    #[serde(default = "default_duration")]
    pub duration_s: i64,
    #[serde(default)]
    pub sim: Option<SimConfig>,
}

impl SourceConfig {
    pub fn new(id: &str, kind: SourceKind) -> Self {
        Self {
            id: id.to_string(),
            kind,
            endpoint: None,
            seed: None,
            poll_interval_s: default_poll(),
            enabled: true,
            objects: default_objects(),
            duration_s: default_duration(),
            sim: None,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.id.is_empty() {
            return Err(IngestError::Config("source id is empty".into()));
        }
        if self.poll_interval_s < 1 {
            return Err(IngestError::Config(format!("{}: poll_interval_s must be at least 1", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub source_id: String,
    pub fetched: usize,
    pub appended: usize,
    pub dropped: usize,
    /// Conforming records lost to a store failure.
    pub failed: usize,
    pub labels_appended: usize,
    pub labels_dropped: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub sources: Vec<SourceReport>,
}

impl IngestReport {
    pub fn appended(&self) -> usize {
        self.sources.iter().map(|s| s.appended).sum()
    }

    pub fn dropped(&self) -> usize {
        self.sources.iter().map(|s| s.dropped).sum()
    }

    pub fn failed_sources(&self) -> usize {
        self.sources.iter().filter(|s| s.error.is_some()).count()
    }
}

/// Where an ingestion cycle writes. Each call is one all-or-nothing batch.
pub trait IngestTarget {
    fn append_fixes(&mut self, fixes: &[GeoFix]) -> Result<usize, StoreError>;
    fn append_labels(&mut self, labels: &[Label]) -> Result<usize, StoreError>;
    fn append_objects(&mut self, objects: &[MarineObject]) -> Result<usize, StoreError>;
}

/// Raw, Label and Metadata stores held open for append for a whole cycle.
#[derive(Debug)]
pub struct StoreTarget {
    raw: StoreHandle,
    labels: StoreHandle,
    metadata: StoreHandle,
}

impl StoreTarget {
    pub fn open(dir: &DataDir, opts: LockOptions) -> Result<Self, StoreError> {
        Ok(Self {
            raw: dir.open_append(StoreKind::Raw, opts)?,
            labels: dir.open_append(StoreKind::Label, opts)?,
            metadata: dir.open_append(StoreKind::Metadata, opts)?,
        })
    }
}

impl IngestTarget for StoreTarget {
    fn append_fixes(&mut self, fixes: &[GeoFix]) -> Result<usize, StoreError> {
        self.raw.append(fixes)
    }

    fn append_labels(&mut self, labels: &[Label]) -> Result<usize, StoreError> {
        self.labels.append(labels)
    }

    fn append_objects(&mut self, objects: &[MarineObject]) -> Result<usize, StoreError> {
        let records: Vec<_> = objects.iter().cloned().map(MetadataRecord::Object).collect();
        self.metadata.append(&records)
    }
}

struct Collected {
    fixes: Vec<GeoFix>,
    objects: Vec<MarineObject>,
    labels: Vec<Label>,
    fetched: usize,
    dropped: usize,
    labels_dropped: usize,
}

/// Provider documents are objects with optional `fixes` (raw-fix records)
/// and `labels` arrays.
fn collect_provider(config: &SourceConfig, fetcher: &dyn Fetcher) -> Result<(Collected, Vec<Violation>), IngestError> {
    let documents = fetcher
        .fetch(config)
        .map_err(|message| IngestError::Transport { source_id: config.id.clone(), message })?;
    let contract = builtin::raw_fix();
    let mut c = Collected { fixes: vec![], objects: vec![], labels: vec![], fetched: 0, dropped: 0, labels_dropped: 0 };
    let mut violations = Vec::new();
    for (d, doc) in documents.iter().enumerate() {
        let value: Value = match serde_json::from_str(doc) {
            Ok(v @ Value::Object(_)) => v,
            _ => {
                c.fetched += 1;
                c.dropped += 1;
                violations.push(Violation::new(contract.reference(), format!("document[{d}]"), ViolationKind::Protocol, "provider document is not a JSON object"));
                continue;
            }
        };
        for (i, record) in value.get("fixes").and_then(Value::as_array).into_iter().flatten().enumerate() {
            c.fetched += 1;
            let mut found = validate_value(&contract, record).map_err(|e| IngestError::Config(e.to_string()))?;
            if found.is_empty() {
                match serde_json::from_value::<GeoFix>(record.clone()) {
                    Ok(fix) if fix.validate().is_ok() => {
                        c.fixes.push(fix);
                        continue;
                    }
                    _ => found.push(Violation::new(contract.reference(), "record", ViolationKind::Bounds, "not a valid fix")),
                }
            }
            c.dropped += 1;
            violations.extend(found.into_iter().map(|v| v.prefixed(&format!("document[{d}].fixes[{i}]"))));
        }
        let batch = check_labels(label_entries(&value)?);
        c.labels_dropped += batch.rejected.len();
        violations.extend(batch.rejected.into_iter().flat_map(|r| r.violations));
        c.labels.extend(batch.labels);
    }
    Ok((c, violations))
}

fn collect(config: &SourceConfig, fetcher: &dyn Fetcher) -> Result<Collected, IngestError> {
    config.validate()?;
    match config.kind {
        SourceKind::Sensor => {
            let sim = config.sim.clone().unwrap_or_default();
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.unwrap_or(0));
            let tracks = simulate_tracks(&sim, &mut rng, config.objects, config.duration_s)?;
            let fixes: Vec<GeoFix> = tracks.iter().flat_map(|t| t.fixes.iter().cloned()).collect();
            let objects = tracks.into_iter().map(|t| t.object).collect();
            Ok(Collected { fetched: fixes.len(), fixes, objects, labels: vec![], dropped: 0, labels_dropped: 0 })
        }
        SourceKind::Crawler => {
            let out = crawl_source(config, fetcher)?;
            Ok(Collected {
                fetched: out.fetched,
                dropped: out.dropped,
                fixes: out.fixes,
                objects: out.objects,
                labels: vec![],
                labels_dropped: 0,
            })
        }
        SourceKind::Provider => Ok(collect_provider(config, fetcher)?.0),
    }
}

/// Run every enabled source once, sequentially. A failing source (fetch or
/// store) is reported and skipped; the others proceed. For every source,
/// `fetched = appended + dropped + failed`.
pub fn run_ingestion_cycle(configs: &[SourceConfig], fetcher: &dyn Fetcher, target: &mut dyn IngestTarget) -> IngestReport {
    let mut report = IngestReport::default();
    for config in configs.iter().filter(|c| c.enabled) {
        let mut r = SourceReport { source_id: config.id.clone(), ..SourceReport::default() };
        match collect(config, fetcher) {
            Err(e) => r.error = Some(e.to_string()),
            Ok(c) => {
                r.fetched = c.fetched;
                r.dropped = c.dropped;
                r.labels_dropped = c.labels_dropped;
                let appended = target
                    .append_fixes(&c.fixes)
                    .and_then(|n| target.append_objects(&c.objects).map(|_| n))
                    .and_then(|n| target.append_labels(&c.labels).map(|l| (n, l)));
                match appended {
                    Ok((n, l)) => {
                        r.appended = n;
                        r.labels_appended = l;
                    }
                    Err(e) => {
                        r.failed = c.fixes.len();
                        r.error = Some(e.to_string());
                    }
                }
            }
        }
        report.sources.push(r);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::validate_value;
    use crate::domain::assemble_trajectory;
    use crate::store::ScanFilter;
    use serde_json::json;

    #[derive(Default)]
    struct MemTarget {
        fixes: Vec<GeoFix>,
        labels: Vec<Label>,
        fail_fixes: bool,
    }

    impl IngestTarget for MemTarget {
        fn append_fixes(&mut self, fixes: &[GeoFix]) -> Result<usize, StoreError> {
            if self.fail_fixes {
                return Err(StoreError::Io("disk full".into()));
            }
            self.fixes.extend_from_slice(fixes);
            Ok(fixes.len())
        }

        fn append_labels(&mut self, labels: &[Label]) -> Result<usize, StoreError> {
            self.labels.extend_from_slice(labels);
            Ok(labels.len())
        }

        fn append_objects(&mut self, objects: &[MarineObject]) -> Result<usize, StoreError> {
            Ok(objects.len())
        }
    }

    fn crawler_fetcher() -> StaticFetcher {
        let good = |m: &str| json!({"mmsi": m, "latitude": 40.0, "longitude": 10.0, "epoch": 1_700_000_100.0});
        StaticFetcher {
            documents: vec![json!([good("1"), good("2"), {"mmsi": "3"}, good("4")]).to_string()],
            fail: None,
        }
    }

    #[test]
    fn disabled_sources_give_zero_report() {
        let mut cfg = SourceConfig::new("s", SourceKind::Sensor);
        cfg.enabled = false;
        let report = run_ingestion_cycle(&[cfg], &StaticFetcher::default(), &mut MemTarget::default());
        assert!(report.sources.is_empty());
        assert_eq!((report.appended(), report.dropped()), (0, 0));
    }

    #[test]
    fn conservation_against_fetcher_totals() {
        let report = run_ingestion_cycle(&[SourceConfig::new("c", SourceKind::Crawler)], &crawler_fetcher(), &mut MemTarget::default());
        let s = &report.sources[0];
        assert_eq!(s.fetched, 4);
        assert_eq!(s.appended + s.dropped + s.failed, s.fetched);
        assert_eq!((s.appended, s.dropped), (3, 1));
    }

    #[test]
    fn failing_store_does_not_affect_other_sources() {
        struct Flaky(MemTarget, usize);
        impl IngestTarget for Flaky {
            fn append_fixes(&mut self, fixes: &[GeoFix]) -> Result<usize, StoreError> {
                self.1 += 1;
                if self.1 == 1 {
                    return Err(StoreError::Io("disk full".into()));
                }
                self.0.append_fixes(fixes)
            }
            fn append_labels(&mut self, labels: &[Label]) -> Result<usize, StoreError> {
                self.0.append_labels(labels)
            }
            fn append_objects(&mut self, objects: &[MarineObject]) -> Result<usize, StoreError> {
                self.0.append_objects(objects)
            }
        }
        let configs = [SourceConfig::new("c1", SourceKind::Crawler), SourceConfig::new("c2", SourceKind::Crawler)];
        let mut target = Flaky(MemTarget::default(), 0);
        let report = run_ingestion_cycle(&configs, &crawler_fetcher(), &mut target);
        assert!(report.sources[0].error.is_some());
        assert_eq!(report.sources[0].failed, 3);
        let alone = run_ingestion_cycle(&configs[1..], &crawler_fetcher(), &mut MemTarget::default());
        assert_eq!(report.sources[1], alone.sources[0]);
    }

    #[test]
    fn transport_failure_reported_per_source() {
        let fetcher = StaticFetcher { documents: vec![], fail: Some("timeout".into()) };
        let configs = [SourceConfig::new("c", SourceKind::Crawler), SourceConfig { seed: Some(3), ..SourceConfig::new("s", SourceKind::Sensor) }];
        let report = run_ingestion_cycle(&configs, &fetcher, &mut MemTarget::default());
        assert!(report.sources[0].error.as_deref().unwrap().contains("timeout"));
        assert_eq!(report.sources[1].appended, 5 * 61);
    }

    #[test]
    fn provider_documents_carry_fixes_and_labels() {
        let doc = json!({
            "fixes": [{"object_id": "p1", "lat": 1.0, "lon": 2.0, "timestamp": 100, "source": "provider", "object_type": "vessel"},
                      {"object_id": "p1", "lat": 1.0, "lon": 2.0, "timestamp": -5, "source": "provider", "object_type": "vessel"}],
            "labels": [{"object_id": "p1", "start_ts": 90, "end_ts": 110, "verdict": "anomalous", "kind": "ais_gap"},
                       {"object_id": "p1", "start_ts": 90, "end_ts": 110, "verdict": "anomalous"}]
        });
        let fetcher = StaticFetcher { documents: vec![doc.to_string()], fail: None };
        let mut target = MemTarget::default();
        let report = run_ingestion_cycle(&[SourceConfig::new("p", SourceKind::Provider)], &fetcher, &mut target);
        let s = &report.sources[0];
        assert_eq!((s.fetched, s.appended, s.dropped, s.labels_appended, s.labels_dropped), (2, 1, 1, 1, 1));
        assert_eq!(target.labels[0].kind, Some(crate::domain::AnomalyKind::AisGap));
    }

    #[test]
    fn store_cycle_writes_conforming_records_and_replay_dedups() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = DataDir::new(tmp.path());
        let cfg = SourceConfig { seed: Some(11), objects: 2, duration_s: 600, ..SourceConfig::new("s", SourceKind::Sensor) };
        for _ in 0..2 {
            let mut target = StoreTarget::open(&dir, LockOptions::default()).unwrap();
            let report = run_ingestion_cycle(std::slice::from_ref(&cfg), &StaticFetcher::default(), &mut target);
            assert_eq!(report.appended(), 22);
        }
        let raw = dir.open_read(StoreKind::Raw).unwrap();
        let contract = builtin::raw_fix();
        let all: Vec<Value> = raw.scan(&ScanFilter::all()).unwrap().collect();
        assert_eq!(all.len(), 44);
        assert!(all.iter().all(|r| validate_value(&contract, r).unwrap().is_empty()));
        let fixes: Vec<GeoFix> = raw.scan(&ScanFilter::object("sim-000")).unwrap().typed().unwrap();
        assert_eq!(assemble_trajectory(fixes, "sim-000").unwrap().len(), 11);
    }

    #[test]
    fn concurrent_cycles_are_forbidden() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = DataDir::new(tmp.path());
        let _first = StoreTarget::open(&dir, LockOptions::default()).unwrap();
        assert!(matches!(StoreTarget::open(&dir, LockOptions::default()), Err(StoreError::Busy { .. })));
    }
}

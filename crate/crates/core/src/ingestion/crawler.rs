//! Anti-corruption layer between upstream provider documents and the
//! domain model.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use serde_json::{Map, Value};

use super::{IngestError, SourceConfig};
use crate::contract::{builtin, validate_record, DataContract, Violation, ViolationKind};
use crate::domain::{GeoFix, MarineObject, ObjectType, Source};

/// Fetches raw upstream documents. Injected so tests can substitute fakes.
pub trait Fetcher {
    fn fetch(&self, config: &SourceConfig) -> Result<Vec<String>, String>;
}

/// Reads fixture documents under a root directory. The source endpoint is
/// a path relative to the root, either one file or a directory whose
/// `*.json` files are read in name order.
#[derive(Debug, Clone)]
pub struct FixtureFetcher {
    root: PathBuf,
}

impl FixtureFetcher {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
}

impl Fetcher for FixtureFetcher {
    fn fetch(&self, config: &SourceConfig) -> Result<Vec<String>, String> {
        let target = match &config.endpoint {
            Some(rel) => self.root.join(rel),
            None => self.root.clone(),
        };
        let paths = if target.is_dir() {
            let mut paths: Vec<_> = fs::read_dir(&target)
                .map_err(|e| format!("{}: {e}", target.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            paths
        } else {
            vec![target]
        };
        paths
            .iter()
            .map(|p| fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display())))
            .collect()
    }
}

/// Canned documents, for tests and embedding.
#[derive(Debug, Clone, Default)]
pub struct StaticFetcher {
    pub documents: Vec<String>,
    pub fail: Option<String>,
}

impl Fetcher for StaticFetcher {
    fn fetch(&self, _config: &SourceConfig) -> Result<Vec<String>, String> {
        match &self.fail {
            Some(msg) => Err(msg.clone()),
            None => Ok(self.documents.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrawlOutcome {
    pub fixes: Vec<GeoFix>,
    pub objects: Vec<MarineObject>,
    /// Upstream records seen, conforming or not.
    pub fetched: usize,
    pub dropped: usize,
    pub violations: Vec<Violation>,
}

pub fn provider_object_type(vessel_type: Option<&str>) -> ObjectType {
    match vessel_type {
        Some("cargo" | "tanker" | "fishing") => ObjectType::Vessel,
        Some("buoy" | "platform") => ObjectType::Structure,
        _ => ObjectType::Unidentified,
    }
}

fn translate(record: &Map<String, Value>) -> Result<(GeoFix, MarineObject), String> {
    let s = |k: &str| record.get(k).and_then(Value::as_str);
    let f = |k: &str| record.get(k).and_then(Value::as_f64);
    let object_id = s("mmsi").ok_or("mmsi missing")?.to_string();
    let vessel_type = s("vessel_type");
    let object_type = provider_object_type(vessel_type);
    let fix = GeoFix {
        object_id: object_id.clone(),
        lat: f("latitude").ok_or("latitude missing")?,
        lon: f("longitude").ok_or("longitude missing")?,
        timestamp: f("epoch").ok_or("epoch missing")?.floor() as i64,
        sog: f("speed"),
        // Upstream allows 360 for due north.
        cog: f("course").map(|c| if c >= 360.0 { 0.0 } else { c }),
        source: Source::Crawler,
        object_type,
    };
    fix.validate().map_err(|e| e.to_string())?;
    let mut metadata = BTreeMap::new();
    for key in ["name", "flag", "callsign", "vessel_type"] {
        if let Some(v) = s(key) {
            metadata.insert(key.to_string(), v.to_string());
        }
    }
    Ok((fix, MarineObject { object_id, object_type, metadata }))
}

/// Parse fetched documents against the crawler contract. Conforming
/// records become fixes; everything else is dropped and counted. Malformed
/// upstream data never fails the crawl, only transport failures do.
pub fn crawl_source(config: &SourceConfig, fetcher: &dyn Fetcher) -> Result<CrawlOutcome, IngestError> {
    let documents = fetcher
        .fetch(config)
        .map_err(|message| IngestError::Transport { source_id: config.id.clone(), message })?;
    let contract = builtin::crawler_record();
    let mut out = CrawlOutcome::default();
    let mut seen_objects = BTreeMap::new();
    for (d, doc) in documents.iter().enumerate() {
        if doc.trim().is_empty() {
            continue;
        }
        let records = match serde_json::from_str::<Value>(doc) {
            Ok(Value::Array(items)) => items,
            _ => {
                out.fetched += 1;
                out.dropped += 1;
                out.violations.push(Violation::new(
                    contract.reference(),
                    format!("document[{d}]"),
                    ViolationKind::Protocol,
                    "document is not a JSON array of records",
                ));
                continue;
            }
        };
        for (i, item) in records.iter().enumerate() {
            out.fetched += 1;
            match check(&contract, item, d, i)? {
                Ok(map) => match translate(map) {
                    Ok((fix, object)) => {
                        out.fixes.push(fix);
                        seen_objects.insert(object.object_id.clone(), object);
                    }
                    Err(message) => {
                        out.dropped += 1;
                        out.violations.push(Violation::new(
                            contract.reference(),
                            format!("document[{d}].record[{i}]"),
                            ViolationKind::Bounds,
                            message,
                        ));
                    }
                },
                Err(violations) => {
                    out.dropped += 1;
                    out.violations.extend(violations);
                }
            }
        }
    }
    out.objects = seen_objects.into_values().collect();
    Ok(out)
}

#[allow(clippy::type_complexity)]
fn check<'a>(
    contract: &DataContract,
    item: &'a Value,
    d: usize,
    i: usize,
) -> Result<Result<&'a Map<String, Value>, Vec<Violation>>, IngestError> {
    let prefix = format!("document[{d}].record[{i}]");
    let Value::Object(map) = item else {
        return Ok(Err(vec![Violation::new(contract.reference(), prefix, ViolationKind::Protocol, "record is not an object")]));
    };
    let violations = validate_record(contract, map).map_err(|e| IngestError::Config(e.to_string()))?;
    if violations.is_empty() {
        Ok(Ok(map))
    } else {
        Ok(Err(violations.into_iter().map(|v| v.prefixed(&prefix)).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::validate_value;
    use crate::ingestion::SourceKind;
    use serde_json::json;

    fn config() -> SourceConfig {
        SourceConfig::new("crawler-a", SourceKind::Crawler)
    }

    fn record(mmsi: &str, lat: f64) -> Value {
        json!({"mmsi": mmsi, "latitude": lat, "longitude": 12.5, "epoch": 1_700_000_000.75, "speed": 11.0,
               "course": 360.0, "vessel_type": "tanker", "name": "Nordic"})
    }

    #[test]
    fn three_valid_one_malformed() {
        let doc = json!([record("1", 40.0), record("2", 41.0), {"mmsi": 3, "latitude": 1.0}, record("4", 42.0)]);
        let fetcher = StaticFetcher { documents: vec![doc.to_string()], fail: None };
        let out = crawl_source(&config(), &fetcher).unwrap();
        assert_eq!((out.fixes.len(), out.dropped, out.fetched), (3, 1, 4));
        assert_eq!(out.fixes[0].timestamp, 1_700_000_000);
        assert_eq!(out.fixes[0].cog, Some(0.0));
        assert_eq!(out.fixes[0].object_type, ObjectType::Vessel);
        assert_eq!(out.objects[0].metadata["name"], "Nordic");
    }

    #[test]
    fn empty_document() {
        let fetcher = StaticFetcher { documents: vec!["[]".into()], fail: None };
        let out = crawl_source(&config(), &fetcher).unwrap();
        assert_eq!((out.fixes.len(), out.dropped), (0, 0));
    }

    #[test]
    fn upstream_type_change_drops_everything() {
        let payload: Vec<Value> = (0..4)
            .map(|i| {
                let mut r = record(&i.to_string(), 40.0);
                r["latitude"] = json!(format!("{}", 40 + i));
                r
            })
            .collect();
        // The oracle: the contract alone rejects every record.
        let contract = builtin::crawler_record();
        assert!(payload.iter().all(|r| !validate_value(&contract, r).unwrap().is_empty()));
        let fetcher = StaticFetcher { documents: vec![Value::Array(payload).to_string()], fail: None };
        let out = crawl_source(&config(), &fetcher).unwrap();
        assert_eq!((out.fixes.len(), out.dropped), (0, 4));
        assert!(out.violations.iter().all(|v| v.kind == ViolationKind::TypeMismatch));
    }

    #[test]
    fn garbage_document_is_dropped_not_raised() {
        let fetcher = StaticFetcher { documents: vec!["{not json".into(), json!([record("9", 1.0)]).to_string()], fail: None };
        let out = crawl_source(&config(), &fetcher).unwrap();
        assert_eq!((out.fixes.len(), out.dropped), (1, 1));
    }

    #[test]
    fn transport_failure_names_source() {
        let fetcher = StaticFetcher { documents: vec![], fail: Some("connection reset".into()) };
        match crawl_source(&config(), &fetcher) {
            Err(IngestError::Transport { source_id, .. }) => assert_eq!(source_id, "crawler-a"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn boundary_longitude_180_is_dropped() {
        let mut r = record("5", 10.0);
        r["longitude"] = json!(180.0);
        let fetcher = StaticFetcher { documents: vec![json!([r]).to_string()], fail: None };
        let out = crawl_source(&config(), &fetcher).unwrap();
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn repository_fixtures_parse() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/provider");
        let out = crawl_source(&config(), &FixtureFetcher::new(dir)).unwrap();
        assert!(!out.fixes.is_empty());
        assert_eq!(out.fetched, out.fixes.len() + out.dropped);
        assert!(out.objects.iter().any(|o| o.object_type == ObjectType::Structure));
    }
}

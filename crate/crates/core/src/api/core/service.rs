//! The investigator service. Depends on ports only.

use std::cmp::Ordering;
use std::sync::Arc;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::ports::*;
use crate::contract::checksum::Fnv1a;
use crate::contract::{builtin, CodeContract, Contract, Violation, ViolationKind};
use crate::domain::{
    assemble_trajectory, filter_fixes, Annotator, Anomaly, Explanation, GeoFix, Label, MarineObject, Trajectory,
};

/// Every port the service needs. Wiring fills it with adapters or fakes.
#[derive(Clone)]
pub struct PortSet {
    pub fixes: Arc<dyn FixRepository>,
    pub anomalies: Arc<dyn AnomalyRepository>,
    pub labels: Arc<dyn LabelRepository>,
    pub model: Arc<dyn ModelPort>,
    pub storage: Arc<dyn StoragePort>,
    pub reference: Arc<dyn ReferenceDataPort>,
    pub config: Arc<dyn ConfigPort>,
    pub security: Arc<dyn SecurityPort>,
    pub cache: Arc<dyn CachePort>,
}

pub struct InvestigatorService {
    ports: PortSet,
    contract: CodeContract,
}

/// Position after which a page starts: the sort key of the last item
/// returned plus how many items sharing that key were already returned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cursor {
    pub ts: i64,
    pub id: String,
    pub skip: usize,
}

impl Cursor {
    pub fn encode(&self) -> String {
        URL_SAFE_NO_PAD.encode(format!("{}:{}:{}", self.ts, self.skip, self.id))
    }

    pub fn decode(token: &str) -> Result<Self, ApiError> {
        let bad = || ApiError::BadRequest {
            message: "malformed cursor".into(),
            violations: vec![Violation::new(
                builtin::api_service().reference(),
                "query.cursor",
                ViolationKind::TypeMismatch,
                format!("`{token}` is not a cursor issued by this service"),
            )],
        };
        let raw = URL_SAFE_NO_PAD.decode(token).map_err(|_| bad())?;
        let text = String::from_utf8(raw).map_err(|_| bad())?;
        let mut parts = text.splitn(3, ':');
        let ts = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let skip = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let id = parts.next().ok_or_else(bad)?.to_string();
        Ok(Self { ts, id, skip })
    }
}

fn page_limit(limit: Option<usize>) -> Result<usize, ApiError> {
    match limit {
        None => Ok(DEFAULT_PAGE),
        Some(n) if (1..=MAX_PAGE).contains(&n) => Ok(n),
        Some(n) => Err(ApiError::bad_request(format!("limit {n} outside [1, {MAX_PAGE}]"))),
    }
}

/// Stable-sort `items` by `key` and cut the page after `cursor`.
pub fn paginate<T>(
    mut items: Vec<T>,
    key: impl Fn(&T) -> (i64, &str),
    cursor: Option<&Cursor>,
    limit: usize,
) -> Page<T> {
    items.sort_by(|a, b| key(a).cmp(&key(b)));
    let cmp_to = |item: &T, ts: i64, id: &str| key(item).cmp(&(ts, id));
    let start = match cursor {
        None => 0,
        Some(c) => {
            let lower = items.partition_point(|x| cmp_to(x, c.ts, &c.id) == Ordering::Less);
            let upper = items.partition_point(|x| cmp_to(x, c.ts, &c.id) != Ordering::Greater);
            (lower + c.skip).min(upper)
        }
    };
    let end = (start + limit).min(items.len());
    let next_cursor = (end < items.len() && end > start).then(|| {
        let (ts, id) = key(&items[end - 1]);
        let first = items.partition_point(|x| cmp_to(x, ts, id) == Ordering::Less);
        Cursor { ts, id: id.to_string(), skip: end - first }.encode()
    });
    let items: Vec<T> = items.into_iter().skip(start).take(end - start).collect();
    Page { items, next_cursor }
}

/// Steps kept at summary verbosity.
pub fn summarize(explanation: &Explanation) -> Explanation {
    Explanation {
        steps: explanation.steps.iter().filter(|s| s.fired || s.contribution != 0.0).cloned().collect(),
        summary: explanation.summary.clone(),
    }
}

pub fn label_id(label: &Label) -> String {
    let mut h = Fnv1a::default();
    let kind = label.kind.map(|k| k.to_string()).unwrap_or_default();
    for part in [
        label.object_id.as_str(),
        &label.window.start_ts.to_string(),
        &label.window.end_ts.to_string(),
        label.verdict.as_str(),
        &kind,
        label.annotator.as_str(),
        label.note.as_deref().unwrap_or(""),
    ] {
        h.update(part.as_bytes());
        h.update(b"|");
    }
    format!("lb-{}", h.hex())
}

fn label_violation(location: &str, kind: ViolationKind, message: String) -> ApiError {
    ApiError::BadRequest {
        message: format!("invalid label: {message}"),
        violations: vec![Violation::new(builtin::label().reference(), location, kind, message)],
    }
}

fn fixes_key(f: &GeoFix) -> (i64, &str) {
    (f.timestamp, f.object_id.as_str())
}

fn anomaly_key(a: &Anomaly) -> (i64, &str) {
    (a.window.start_ts, a.anomaly_id.as_str())
}

impl InvestigatorService {
    pub fn new(ports: PortSet, contract: CodeContract) -> Self {
        Self { ports, contract }
    }

    pub fn contract(&self) -> &CodeContract {
        &self.contract
    }

    pub fn config(&self) -> ApiConfig {
        self.ports.config.config()
    }

    pub fn snapshots(&self) -> Result<Vec<String>, ApiError> {
        Ok(self.ports.storage.snapshot_ids()?)
    }

    fn cached<T: Serialize + DeserializeOwned>(
        &self,
        key: String,
        compute: impl FnOnce() -> Result<T, ApiError>,
    ) -> Result<T, ApiError> {
        if let Some(hit) = self.ports.cache.get(&key).and_then(|v| serde_json::from_value(v).ok()) {
            return Ok(hit);
        }
        let value = compute()?;
        if let Ok(v) = serde_json::to_value(&value) {
            self.ports.cache.put(&key, v);
        }
        Ok(value)
    }

    fn known_object(&self, object_id: &str) -> Result<Option<MarineObject>, ApiError> {
        if let Some(o) = self.ports.fixes.object(object_id)? {
            return Ok(Some(o));
        }
        // Upstream reference data is best effort; an outage reads as unknown.
        if let Ok(Some(o)) = self.ports.reference.lookup_object(object_id) {
            return Ok(Some(o));
        }
        // Objects seen only through fixes take the type of their latest fix.
        let fixes = self.ports.fixes.fixes_of(object_id)?;
        Ok(fixes.iter().max_by_key(|f| f.timestamp).map(|f| MarineObject {
            object_id: object_id.to_string(),
            object_type: f.object_type,
            metadata: Default::default(),
        }))
    }
}

fn check_window(from_ts: Option<i64>, to_ts: Option<i64>) -> Result<(), ApiError> {
    match (from_ts, to_ts) {
        (Some(f), Some(t)) if f > t => Err(ApiError::bad_request(format!("from {f} after to {t}"))),
        _ => Ok(()),
    }
}

impl InvestigatorApi for InvestigatorService {
    fn authorize(&self, bearer: Option<&str>) -> Result<(), ApiError> {
        if self.ports.security.authorize(bearer) {
            Ok(())
        } else {
            Err(ApiError::Unauthorized)
        }
    }

    fn geolocations(&self, query: &GeoQuery) -> Result<Page<GeoFix>, ApiError> {
        query.aoi.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
        let limit = page_limit(query.limit)?;
        let cursor = query.cursor.as_deref().map(Cursor::decode).transpose()?;
        let key = format!("geo|{:?}|{:?}|{:?}|{:?}|{limit}", query.aoi, query.sources, query.types, cursor);
        self.cached(key, || {
            let fixes = self.ports.fixes.fixes_in(&query.aoi)?;
            let fixes = filter_fixes(&fixes, &query.aoi, query.sources.as_ref(), query.types.as_ref());
            Ok(paginate(fixes, fixes_key, cursor.as_ref(), limit))
        })
    }

    fn object(&self, object_id: &str) -> Result<MarineObject, ApiError> {
        self.cached(format!("object|{object_id}"), || {
            self.known_object(object_id)?.ok_or_else(|| ApiError::NotFound(format!("unknown object {object_id}")))
        })
    }

    fn trajectory(&self, object_id: &str, from_ts: Option<i64>, to_ts: Option<i64>) -> Result<Trajectory, ApiError> {
        check_window(from_ts, to_ts)?;
        self.cached(format!("trajectory|{object_id}|{from_ts:?}|{to_ts:?}"), || {
            let fixes = self.ports.fixes.fixes_of(object_id)?;
            if fixes.is_empty() && self.known_object(object_id)?.is_none() {
                return Err(ApiError::NotFound(format!("unknown object {object_id}")));
            }
            let in_window: Vec<GeoFix> = fixes
                .into_iter()
                .filter(|f| from_ts.is_none_or(|t| f.timestamp >= t) && to_ts.is_none_or(|t| f.timestamp <= t))
                .collect();
            assemble_trajectory(in_window, object_id).map_err(|e| ApiError::Internal(e.to_string()))
        })
    }

    fn anomalies(&self, query: &AnomalyQuery) -> Result<Page<Anomaly>, ApiError> {
        query.aoi.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
        let limit = page_limit(query.limit)?;
        let cursor = query.cursor.as_deref().map(Cursor::decode).transpose()?;
        let key = format!("anomalies|{:?}|{:?}|{limit}", query.aoi, cursor);
        self.cached(key, || {
            let aoi = &query.aoi;
            let hits: Vec<Anomaly> = self
                .ports
                .anomalies
                .all()?
                .into_iter()
                .filter(|a| {
                    aoi.contains_position(a.location.lat, a.location.lon)
                        && aoi.intersects_window(a.window.start_ts, a.window.end_ts)
                })
                .collect();
            Ok(paginate(hits, anomaly_key, cursor.as_ref(), limit))
        })
    }

    fn explanation(&self, anomaly_id: &str) -> Result<Explanation, ApiError> {
        let anomaly = self
            .ports
            .anomalies
            .get(anomaly_id)?
            .ok_or_else(|| ApiError::NotFound(format!("unknown anomaly {anomaly_id}")))?;
        Ok(match self.config().verbosity {
            Verbosity::Full => anomaly.explanation,
            Verbosity::Summary => summarize(&anomaly.explanation),
        })
    }

    fn detect(&self, request: &DetectRequest) -> Result<Vec<Anomaly>, ApiError> {
        check_window(Some(request.from), Some(request.to))?;
        let fixes = self.ports.fixes.fixes_of(&request.object_id)?;
        if fixes.is_empty() && self.known_object(&request.object_id)?.is_none() {
            return Err(ApiError::NotFound(format!("unknown object {}", request.object_id)));
        }
        let in_window: Vec<GeoFix> =
            fixes.into_iter().filter(|f| (request.from..=request.to).contains(&f.timestamp)).collect();
        let trajectory =
            assemble_trajectory(in_window, &request.object_id).map_err(|e| ApiError::Internal(e.to_string()))?;
        if trajectory.len() < 2 {
            return Err(ApiError::Unprocessable(format!(
                "{} fix(es) for {} in [{}, {}]; detection needs at least 2",
                trajectory.len(),
                request.object_id,
                request.from,
                request.to
            )));
        }
        let anomalies = self.ports.model.detect(request.model.as_deref(), &trajectory.fixes).map_err(|e| match e {
            PortError::NotFound(m) | PortError::Unavailable(m) => ApiError::Unavailable(m),
            PortError::Invalid(m) | PortError::Internal(m) => ApiError::Internal(m),
        })?;
        if self.ports.anomalies.append_new(&anomalies)? > 0 {
            self.ports.cache.clear();
        }
        Ok(anomalies)
    }

    fn post_label(&self, mut label: Label) -> Result<LabelReceipt, ApiError> {
        if label.annotator != Annotator::Investigator {
            return Err(label_violation(
                "annotator",
                ViolationKind::Bounds,
                format!("labels posted here must have annotator investigator, got {}", label.annotator),
            ));
        }
        if let Err(e) = label.validate() {
            let (location, kind) = if label.verdict == crate::domain::Verdict::Anomalous && label.kind.is_none() {
                ("kind", ViolationKind::MissingField)
            } else if label.object_id.is_empty() {
                ("object_id", ViolationKind::MissingField)
            } else {
                ("end_ts", ViolationKind::Bounds)
            };
            return Err(label_violation(location, kind, e.to_string()));
        }
        let id = label.label_id.clone().unwrap_or_else(|| label_id(&label));
        label.label_id = Some(id.clone());
        match self.ports.labels.find(&id)? {
            Some(existing) if existing == label => {}
            Some(_) => {
                return Err(label_violation("label_id", ViolationKind::Bounds, format!("label id {id} already used")));
            }
            None => self.ports.labels.append(&label)?,
        }
        Ok(LabelReceipt { label_id: id, label })
    }

    fn health(&self) -> Health {
        let model_id = self.ports.model.resolve(None).ok();
        let contract: Value = serde_json::from_str(&Contract::Code(self.contract.clone()).to_file_string())
            .unwrap_or(Value::Null);
        Health { status: if model_id.is_some() { "ok" } else { "degraded" }.into(), model_id, contract }
    }
}

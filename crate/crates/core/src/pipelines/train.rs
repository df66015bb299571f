//! Rule and ML training pipelines. Both read snapshots only and register
//! their model with a training-run record.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::detector::Detector;
use super::eval::{ml_false_positive_rate, pooled_recall, precision, recall_by_kind, tracks};
use super::features::{nearest_rank, pair_speed_kn, point_features};
use super::ml::{MlModel, DEFAULT_QUANTILE_Q};
use super::rules::{Rule, RuleModel, CALIBRATION_QUANTILE, DEFAULT_CALIBRATION_MARGIN};
use super::PipelineError;
use crate::contract::{builtin, ModelContract};
use crate::domain::{Anomaly, AnomalyKind, AreaOfInterest, GeoFix, Label, Verdict};
use crate::store::{
    now_ts, DataDir, LockOptions, MetadataRecord, ModelId, ModelKind, ModelManifest, PipelineKind, Snapshot, StoreError,
    StoreKind, TrainingRunRecord,
};

pub const RULE_MODEL_NAME: &str = "rule-detector";
pub const ML_MODEL_NAME: &str = "ml-detector";
/// Hyperparameter value requesting a threshold calibrated on the data.
pub const CALIBRATE: &str = "calibrate";

pub type Hyperparams = BTreeMap<String, Value>;

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Fixed creation time for the manifest and run record; wall clock when unset.
    pub created_ts: Option<i64>,
    pub lock: LockOptions,
    pub model_name: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model_id: ModelId,
    pub manifest: ModelManifest,
    pub run: TrainingRunRecord,
}

/// Per fix: covered by a normal label and by no anomalous label of its object.
pub fn label_normal_mask(track: &[GeoFix], labels: &[Label]) -> Vec<bool> {
    let mine: Vec<&Label> = labels.iter().filter(|l| track.first().is_some_and(|f| f.object_id == l.object_id)).collect();
    track
        .iter()
        .map(|f| {
            let covered = |v: Verdict| mine.iter().any(|l| l.verdict == v && l.window.contains(f.timestamp));
            covered(Verdict::Normal) && !covered(Verdict::Anomalous)
        })
        .collect()
}

pub fn detect_all(detector: &Detector, fixes: &[GeoFix]) -> Result<Vec<Anomaly>, PipelineError> {
    let mut out = Vec::new();
    for track in tracks(fixes).values() {
        if track.len() >= 2 {
            out.extend(detector.detect(track)?);
        }
    }
    Ok(out)
}

fn number(hyper: &Hyperparams, key: &str) -> Result<Option<f64>, PipelineError> {
    match hyper.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| PipelineError::Config(format!("hyperparameter {key} must be a number, got {v}"))),
    }
}

fn check_keys(hyper: &Hyperparams, contract: &ModelContract) -> Result<(), PipelineError> {
    match hyper.keys().find(|k| !contract.hyperparameters.contains_key(*k)) {
        Some(k) => Err(PipelineError::Config(format!(
            "unknown hyperparameter {k}; expected one of {}",
            contract.hyperparameters.keys().cloned().collect::<Vec<_>>().join(", ")
        ))),
        None => Ok(()),
    }
}

fn snapshot_zones(dir: &DataDir, snapshot: &Snapshot) -> Result<Vec<AreaOfInterest>, PipelineError> {
    for m in dir.data_store().lineage(&snapshot.manifest.snapshot_id)? {
        if let Some(z) = m.params.get("zones") {
            return Ok(serde_json::from_value(z.clone())?);
        }
    }
    Ok(vec![])
}

struct Registration<'a> {
    dir: &'a DataDir,
    name: &'a str,
    kind: ModelKind,
    contract: ModelContract,
    snapshot_id: &'a str,
    hyper: BTreeMap<String, Value>,
    params: Vec<u8>,
    metrics: BTreeMap<String, Value>,
    opts: &'a TrainOptions,
}

fn register(r: Registration) -> Result<TrainOutcome, PipelineError> {
    let started = r.opts.created_ts.unwrap_or_else(now_ts);
    let registry = r.dir.registry();
    let next = registry.versions(r.name)?.into_iter().max().unwrap_or(0) + 1;
    let run_id = format!("{}-run-{next}", r.name);
    let manifest = ModelManifest::draft(r.name, r.kind, &r.contract, r.hyper.clone(), &run_id, r.snapshot_id, started);
    let staged = registry.stage(manifest, &r.params, &r.contract)?;
    if staged.model_id().version != next {
        return Err(StoreError::Integrity(format!("{} registered concurrently; retry", staged.model_id())).into());
    }
    let model_id = staged.commit()?;
    let entry = registry.resolve(&model_id.name, Some(model_id.version))?;
    let run = TrainingRunRecord {
        run_id,
        pipeline: match r.kind {
            ModelKind::Rule => PipelineKind::Rule,
            ModelKind::Ml => PipelineKind::Ml,
        },
        hyperparameters: Value::Object(r.hyper.into_iter().collect()),
        data_snapshot_id: r.snapshot_id.to_string(),
        model_id: Some(model_id.to_string()),
        metrics: r.metrics,
        started_ts: started,
        ended_ts: r.opts.created_ts.unwrap_or_else(now_ts).max(started),
    };
    run.validate()?;
    let mut metadata = r.dir.open_append(StoreKind::Metadata, r.opts.lock)?;
    metadata.append(&[MetadataRecord::TrainingRun(run.clone())])?;
    Ok(TrainOutcome { model_id, manifest: entry.manifest, run })
}

fn params_bytes<T: serde::Serialize>(model: &T) -> Result<Vec<u8>, PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(model)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Label-normal consecutive pairs: (implied speed, interval).
fn normal_pairs(snapshot: &Snapshot) -> Vec<(Option<f64>, f64)> {
    let mut out = Vec::new();
    for track in tracks(&snapshot.fixes).values() {
        let mask = label_normal_mask(track, &snapshot.labels);
        for i in 1..track.len() {
            if mask[i - 1] && mask[i] {
                out.push((pair_speed_kn(&track[i - 1], &track[i]), (track[i].timestamp - track[i - 1].timestamp) as f64));
            }
        }
    }
    out
}

/// Train the rule model. Each threshold comes from the hyperparameters or,
/// when given as `"calibrate"`, from the 99.5th percentile of its quantity
/// over label-normal data times the calibration margin.
pub fn train_rule(dir: &DataDir, snapshot_id: &str, hyper: &Hyperparams, opts: &TrainOptions) -> Result<TrainOutcome, PipelineError> {
    let contract = builtin::rule_model();
    check_keys(hyper, &contract)?;
    let snapshot = dir.data_store().read(snapshot_id)?;
    let pairs = normal_pairs(&snapshot);
    if pairs.is_empty() {
        return Err(PipelineError::InsufficientData(format!("snapshot {snapshot_id} has no label-normal fixes")));
    }
    let margin = number(hyper, "calibration_margin")?.unwrap_or(DEFAULT_CALIBRATION_MARGIN);
    if !(margin >= 1.0 && margin.is_finite()) {
        return Err(PipelineError::Config(format!("calibration_margin must be >= 1, got {margin}")));
    }

    let mut calibrated = Vec::new();
    let mut effective: BTreeMap<String, Value> = BTreeMap::new();
    let mut rules = Vec::new();
    let specs = [
        ("max_speed_kn", AnomalyKind::ExcessiveSpeed, "kn"),
        ("gap_threshold_s", AnomalyKind::AisGap, "s"),
        ("jump_speed_kn", AnomalyKind::ImpossibleJump, "kn"),
        ("min_zone_fixes", AnomalyKind::ZoneViolation, "fixes"),
    ];
    for (key, kind, unit) in specs {
        let threshold = match hyper.get(key) {
            Some(Value::String(s)) if s == CALIBRATE => {
                let mut values: Vec<f64> = match kind {
                    AnomalyKind::AisGap => pairs.iter().map(|p| p.1).collect(),
                    AnomalyKind::ExcessiveSpeed | AnomalyKind::ImpossibleJump => pairs.iter().filter_map(|p| p.0).collect(),
                    _ => return Err(PipelineError::Config(format!("{key} cannot be calibrated"))),
                };
                let q = nearest_rank(&mut values, CALIBRATION_QUANTILE)
                    .ok_or_else(|| PipelineError::InsufficientData(format!("no label-normal values for {key}")))?;
                calibrated.push(Value::from(key));
                q * margin
            }
            _ => number(hyper, key)?.unwrap_or_else(|| contract.hyperparameters[key].as_f64().expect("numeric default")),
        };
        effective.insert(key.to_string(), json!(threshold));
        rules.push(Rule { kind, threshold, unit: unit.into() });
    }
    let zones: Vec<AreaOfInterest> = match hyper.get("zones") {
        Some(z) => serde_json::from_value(z.clone()).map_err(|e| PipelineError::Config(format!("zones: {e}")))?,
        None => snapshot_zones(dir, &snapshot)?,
    };
    let model = RuleModel { rules, zones };
    model.validate()?;
    effective.insert("zones".into(), serde_json::to_value(&model.zones)?);
    effective.insert("calibration_margin".into(), json!(margin));
    effective.insert("calibrated".into(), Value::Array(calibrated));

    let detector = Detector::Rule { model_id: "candidate".into(), model: model.clone() };
    let found = detect_all(&detector, &snapshot.fixes)?;
    let per_kind = recall_by_kind(&found, &snapshot.labels, &AnomalyKind::RULE_KINDS);
    let mut metrics = BTreeMap::new();
    metrics.insert("train_precision".into(), json!(precision(&found, &snapshot.labels)));
    metrics.insert("train_recall".into(), json!(pooled_recall(&per_kind)));
    for k in &per_kind {
        metrics.insert(format!("recall_{}", k.kind), json!(k.rate()));
    }
    metrics.insert("anomalies".into(), json!(found.len()));
    metrics.insert("normal_pairs".into(), json!(pairs.len()));

    register(Registration {
        dir,
        name: opts.model_name.as_deref().unwrap_or(RULE_MODEL_NAME),
        kind: ModelKind::Rule,
        contract,
        snapshot_id,
        hyper: effective,
        params: params_bytes(&model)?,
        metrics,
        opts,
    })
}

/// Train the robust z-score model on label-normal fixes whose two
/// predecessors are also label-normal.
pub fn train_ml(dir: &DataDir, snapshot_id: &str, hyper: &Hyperparams, opts: &TrainOptions) -> Result<TrainOutcome, PipelineError> {
    let contract = builtin::ml_model();
    check_keys(hyper, &contract)?;
    let q = number(hyper, "quantile_q")?.unwrap_or(DEFAULT_QUANTILE_Q);
    let snapshot = dir.data_store().read(snapshot_id)?;
    let mut points = Vec::new();
    for track in tracks(&snapshot.fixes).values() {
        let mask = label_normal_mask(track, &snapshot.labels);
        for i in 2..track.len() {
            if mask[i - 2] && mask[i - 1] && mask[i] {
                points.push(point_features(track, i));
            }
        }
    }
    let model = MlModel::fit(&points, q)?;

    let detector = Detector::Ml { model_id: "candidate".into(), model: model.clone() };
    let found = detect_all(&detector, &snapshot.fixes)?;
    let fp = ml_false_positive_rate(&detector, &snapshot.fixes, &snapshot.labels)?;
    let per_kind = recall_by_kind(&found, &snapshot.labels, &[AnomalyKind::KinematicOutlier]);
    let mut metrics = BTreeMap::new();
    metrics.insert("train_precision".into(), json!(precision(&found, &snapshot.labels)));
    metrics.insert("train_recall".into(), json!(per_kind[0].rate()));
    metrics.insert("false_positive_window_rate".into(), json!(fp.rate()));
    metrics.insert("training_points".into(), json!(points.len()));
    metrics.insert("score_threshold".into(), json!(model.score_threshold));
    if !model.dropped.is_empty() {
        metrics.insert("warning".into(), json!(format!("dropped zero-MAD feature(s): {}", model.dropped.join(", "))));
    }

    register(Registration {
        dir,
        name: opts.model_name.as_deref().unwrap_or(ML_MODEL_NAME),
        kind: ModelKind::Ml,
        contract,
        snapshot_id,
        hyper: BTreeMap::from([("quantile_q".to_string(), json!(q))]),
        params: params_bytes(&model)?,
        metrics,
        opts,
    })
}

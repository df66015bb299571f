//! Offline batch prediction into the Prediction Store.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::detector::Detector;
use super::PipelineError;
use crate::contract::{builtin, validate_model_dir, ModelContract, Violation, ViolationKind};
use crate::domain::{assemble_trajectory, filter_fixes, Anomaly, AreaOfInterest, GeoFix};
use crate::store::{DataDir, LockOptions, ModelEntry, ModelKind, ModelRef, ScanFilter, StoreKind};

#[derive(Debug, Clone, PartialEq)]
pub enum BatchInput {
    Snapshot(String),
    /// Everything currently in the Raw Store.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub model_id: String,
    pub fixes: usize,
    pub objects: usize,
    pub detected: usize,
    /// Anomalies newly written; ones already in the store are skipped.
    pub written: usize,
}

pub fn contract_for(kind: ModelKind) -> ModelContract {
    match kind {
        ModelKind::Rule => builtin::rule_model(),
        ModelKind::Ml => builtin::ml_model(),
    }
}

/// Resolve a model and check its registry directory against the contract
/// its kind requires.
pub fn load_detector(dir: &DataDir, model: &ModelRef) -> Result<(ModelEntry, Detector), PipelineError> {
    let entry = dir.registry().resolve_ref(model)?;
    let contract = contract_for(entry.manifest.kind);
    let violations = validate_model_dir(&contract, &entry.dir).map_err(|e| PipelineError::Model(e.to_string()))?;
    if !violations.is_empty() {
        return Err(PipelineError::Contract(violations));
    }
    let detector = Detector::from_entry(&entry)?;
    Ok((entry, detector))
}

/// Detect per object over time-ordered, de-duplicated trajectories.
/// Output is ordered by object, then start time, then kind.
pub fn detect_fixes(detector: &Detector, fixes: Vec<GeoFix>) -> Result<(usize, Vec<Anomaly>), PipelineError> {
    let mut by_object: BTreeMap<String, Vec<GeoFix>> = BTreeMap::new();
    for f in fixes {
        by_object.entry(f.object_id.clone()).or_default().push(f);
    }
    let objects = by_object.len();
    let mut out = Vec::new();
    for (object_id, fixes) in by_object {
        let trajectory = assemble_trajectory(fixes, &object_id).map_err(|e| PipelineError::Model(e.to_string()))?;
        if trajectory.len() >= 2 {
            out.extend(detector.detect(&trajectory.fixes)?);
        }
    }
    Ok((objects, out))
}

/// Check detector outputs against the model contract and the domain rules.
pub fn check_outputs(contract: &ModelContract, anomalies: &[Anomaly]) -> Result<(), PipelineError> {
    let mut violations = Vec::new();
    for (i, a) in anomalies.iter().enumerate() {
        let explanation = serde_json::to_value(&a.explanation)?;
        violations.extend(contract.validate_output(a.severity, &explanation).into_iter().map(|v| v.prefixed(&format!("anomaly[{i}]"))));
        if let Err(e) = a.validate() {
            violations.push(Violation::new(contract.reference(), format!("anomaly[{i}]"), ViolationKind::Bounds, e.to_string()));
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(PipelineError::Contract(violations))
    }
}

pub fn batch_predict(
    dir: &DataDir,
    model: &ModelRef,
    input: &BatchInput,
    aoi: Option<&AreaOfInterest>,
    lock: LockOptions,
) -> Result<BatchReport, PipelineError> {
    // Contract mismatches abort here, before any data is read.
    let (entry, detector) = load_detector(dir, model)?;
    if let Some(a) = aoi {
        a.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    let mut fixes = match input {
        BatchInput::Snapshot(id) => dir.data_store().read(id)?.fixes,
        BatchInput::Raw => dir.open_read(StoreKind::Raw)?.scan(&ScanFilter::all())?.typed::<GeoFix>()?,
    };
    if let Some(a) = aoi {
        fixes = filter_fixes(&fixes, a, None, None);
    }
    let n_fixes = fixes.len();
    let (objects, anomalies) = detect_fixes(&detector, fixes)?;
    check_outputs(&contract_for(entry.manifest.kind), &anomalies)?;

    let mut store = dir.open_append(StoreKind::Prediction, lock)?;
    let existing: BTreeSet<String> = store
        .scan(&ScanFilter::all())?
        .filter_map(|v| v.get("anomaly_id").and_then(|x| x.as_str()).map(str::to_string))
        .collect();
    let fresh: Vec<&Anomaly> = anomalies.iter().filter(|a| !existing.contains(&a.anomaly_id)).collect();
    let written = if fresh.is_empty() { 0 } else { store.append(&fresh)? };
    Ok(BatchReport { model_id: entry.model_id.to_string(), fixes: n_fixes, objects, detected: anomalies.len(), written })
}

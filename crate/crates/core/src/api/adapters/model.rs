//! Model adapter: resolves models in the registry and runs them.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use crate::api::core::ports::{ModelPort, PortError};
use crate::domain::{Anomaly, GeoFix};
use crate::pipelines::batch::{check_outputs, contract_for, load_detector};
use crate::pipelines::{Detector, PipelineError};
use crate::store::{DataDir, ModelKind, ModelRef, StoreError};

pub struct RegistryModel {
    dir: DataDir,
    default_model: Option<String>,
    /// Loaded detectors by resolved model id; registry versions are immutable.
    loaded: Mutex<BTreeMap<String, (ModelKind, Arc<Detector>)>>,
}

fn port_err(e: PipelineError) -> PortError {
    match e {
        PipelineError::NotFound(m) => PortError::NotFound(m),
        PipelineError::Store(StoreError::NotFound(m)) => PortError::NotFound(m),
        PipelineError::Contract(v) => {
            PortError::Unavailable(format!("model fails its contract: {}", v.iter().map(|x| x.to_line()).collect::<Vec<_>>().join("; ")))
        }
        other => PortError::Internal(other.to_string()),
    }
}

impl RegistryModel {
    pub fn new(dir: DataDir, default_model: Option<String>) -> Self {
        Self { dir, default_model, loaded: Mutex::new(BTreeMap::new()) }
    }

    fn model_ref(&self, model: Option<&str>) -> Result<ModelRef, PortError> {
        let text = model
            .or(self.default_model.as_deref())
            .ok_or_else(|| PortError::Unavailable("no model requested and no default configured".into()))?;
        ModelRef::from_str(text).map_err(|e| PortError::NotFound(e.to_string()))
    }

    fn load(&self, model: Option<&str>) -> Result<(String, ModelKind, Arc<Detector>), PortError> {
        let r = self.model_ref(model)?;
        let entry = self.dir.registry().resolve_ref(&r).map_err(|e| port_err(e.into()))?;
        let id = entry.model_id.to_string();
        if let Some((kind, d)) = self.loaded.lock().unwrap().get(&id) {
            return Ok((id, *kind, d.clone()));
        }
        let (entry, detector) = load_detector(&self.dir, &ModelRef { name: entry.model_id.name.clone(), version: Some(entry.model_id.version) })
            .map_err(port_err)?;
        let detector = Arc::new(detector);
        self.loaded.lock().unwrap().insert(id.clone(), (entry.manifest.kind, detector.clone()));
        Ok((id, entry.manifest.kind, detector))
    }
}

impl ModelPort for RegistryModel {
    fn resolve(&self, model: Option<&str>) -> Result<String, PortError> {
        self.load(model).map(|(id, _, _)| id)
    }

    fn detect(&self, model: Option<&str>, fixes: &[GeoFix]) -> Result<Vec<Anomaly>, PortError> {
        let (_, kind, detector) = self.load(model)?;
        let anomalies = detector.detect(fixes).map_err(port_err)?;
        check_outputs(&contract_for(kind), &anomalies).map_err(|e| PortError::Internal(e.to_string()))?;
        Ok(anomalies)
    }
}

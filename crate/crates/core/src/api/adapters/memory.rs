//! In-memory fakes for every reading port.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};

use crate::api::core::ports::*;
use crate::domain::{Anomaly, AreaOfInterest, GeoFix, Label, MarineObject};

#[derive(Debug, Default)]
pub struct MemoryFixes {
    fixes: RwLock<Vec<GeoFix>>,
    objects: RwLock<BTreeMap<String, MarineObject>>,
}

impl MemoryFixes {
    pub fn new(fixes: Vec<GeoFix>, objects: Vec<MarineObject>) -> Self {
        Self {
            fixes: RwLock::new(fixes),
            objects: RwLock::new(objects.into_iter().map(|o| (o.object_id.clone(), o)).collect()),
        }
    }

    pub fn push(&self, fix: GeoFix) {
        self.fixes.write().unwrap().push(fix);
    }
}

impl FixRepository for MemoryFixes {
    fn fixes_in(&self, aoi: &AreaOfInterest) -> Result<Vec<GeoFix>, PortError> {
        Ok(self
            .fixes
            .read()
            .unwrap()
            .iter()
            .filter(|f| aoi.contains_position(f.lat, f.lon) && aoi.contains_time(f.timestamp))
            .cloned()
            .collect())
    }

    fn fixes_of(&self, object_id: &str) -> Result<Vec<GeoFix>, PortError> {
        Ok(self.fixes.read().unwrap().iter().filter(|f| f.object_id == object_id).cloned().collect())
    }

    fn object(&self, object_id: &str) -> Result<Option<MarineObject>, PortError> {
        Ok(self.objects.read().unwrap().get(object_id).cloned())
    }
}

#[derive(Debug, Default)]
pub struct MemoryAnomalies {
    items: Mutex<Vec<Anomaly>>,
}

impl MemoryAnomalies {
    pub fn new(items: Vec<Anomaly>) -> Self {
        Self { items: Mutex::new(items) }
    }

    pub fn len(&self) -> usize {
        self.items.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl AnomalyRepository for MemoryAnomalies {
    fn all(&self) -> Result<Vec<Anomaly>, PortError> {
        Ok(self.items.lock().unwrap().clone())
    }

    fn get(&self, anomaly_id: &str) -> Result<Option<Anomaly>, PortError> {
        Ok(self.items.lock().unwrap().iter().find(|a| a.anomaly_id == anomaly_id).cloned())
    }

    fn append_new(&self, anomalies: &[Anomaly]) -> Result<usize, PortError> {
        let mut items = self.items.lock().unwrap();
        let mut n = 0;
        for a in anomalies {
            if !items.iter().any(|x| x.anomaly_id == a.anomaly_id) {
                items.push(a.clone());
                n += 1;
            }
        }
        Ok(n)
    }
}

#[derive(Debug, Default)]
pub struct MemoryLabels {
    items: Mutex<Vec<Label>>,
}

impl MemoryLabels {
    pub fn all(&self) -> Vec<Label> {
        self.items.lock().unwrap().clone()
    }
}

impl LabelRepository for MemoryLabels {
    fn find(&self, label_id: &str) -> Result<Option<Label>, PortError> {
        Ok(self.items.lock().unwrap().iter().find(|l| l.label_id.as_deref() == Some(label_id)).cloned())
    }

    fn append(&self, label: &Label) -> Result<(), PortError> {
        self.items.lock().unwrap().push(label.clone());
        Ok(())
    }
}

type DetectFn = dyn Fn(&[GeoFix]) -> Vec<Anomaly> + Send + Sync;

/// Model fake: a fixed id and a detection function. With no function the
/// model is unresolvable.
pub struct FnModel {
    model_id: String,
    detect: Option<Arc<DetectFn>>,
}

impl FnModel {
    pub fn new(model_id: &str, detect: impl Fn(&[GeoFix]) -> Vec<Anomaly> + Send + Sync + 'static) -> Self {
        Self { model_id: model_id.into(), detect: Some(Arc::new(detect)) }
    }

    pub fn unavailable() -> Self {
        Self { model_id: String::new(), detect: None }
    }
}

impl ModelPort for FnModel {
    fn resolve(&self, model: Option<&str>) -> Result<String, PortError> {
        if self.detect.is_none() {
            return Err(PortError::Unavailable("no model registered".into()));
        }
        match model {
            None => Ok(self.model_id.clone()),
            Some(m) if self.model_id == m || self.model_id.split(':').next() == Some(m) => Ok(self.model_id.clone()),
            Some(m) => Err(PortError::NotFound(format!("model {m}"))),
        }
    }

    fn detect(&self, model: Option<&str>, fixes: &[GeoFix]) -> Result<Vec<Anomaly>, PortError> {
        self.resolve(model)?;
        Ok(self.detect.as_ref().map(|f| f(fixes)).unwrap_or_default())
    }
}

#[derive(Debug, Default)]
pub struct MemoryStorage {
    pub snapshots: BTreeMap<String, Vec<GeoFix>>,
}

impl StoragePort for MemoryStorage {
    fn snapshot_ids(&self) -> Result<Vec<String>, PortError> {
        Ok(self.snapshots.keys().cloned().collect())
    }

    fn snapshot_fixes(&self, snapshot_id: &str) -> Result<Vec<GeoFix>, PortError> {
        self.snapshots.get(snapshot_id).cloned().ok_or_else(|| PortError::NotFound(format!("snapshot {snapshot_id}")))
    }
}

#[derive(Debug, Default)]
pub struct MemoryReference {
    pub objects: BTreeMap<String, MarineObject>,
}

impl ReferenceDataPort for MemoryReference {
    fn lookup_object(&self, object_id: &str) -> Result<Option<MarineObject>, PortError> {
        Ok(self.objects.get(object_id).cloned())
    }
}

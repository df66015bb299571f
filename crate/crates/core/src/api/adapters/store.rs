//! Database and storage adapters over the JSONL stores of a data dir.

use std::collections::BTreeSet;
use std::sync::Mutex;

use crate::api::core::ports::*;
use crate::domain::{Anomaly, AreaOfInterest, GeoFix, Label, MarineObject};
use crate::store::{DataDir, LockOptions, MetadataRecord, ScanFilter, StoreError, StoreKind};

fn port_err(e: StoreError) -> PortError {
    match e {
        StoreError::NotFound(m) => PortError::NotFound(m),
        StoreError::Busy { .. } => PortError::Unavailable(e.to_string()),
        other => PortError::Internal(other.to_string()),
    }
}

fn scan<T: serde::de::DeserializeOwned>(dir: &DataDir, kind: StoreKind, filter: &ScanFilter) -> Result<Vec<T>, PortError> {
    dir.open_read(kind).and_then(|h| h.scan(filter)).and_then(|s| s.typed()).map_err(port_err)
}

/// Fixes from the Raw Store, objects from the Metadata Store.
#[derive(Debug, Clone)]
pub struct StoreFixRepository {
    dir: DataDir,
}

impl StoreFixRepository {
    pub fn new(dir: DataDir) -> Self {
        Self { dir }
    }
}

impl FixRepository for StoreFixRepository {
    fn fixes_in(&self, aoi: &AreaOfInterest) -> Result<Vec<GeoFix>, PortError> {
        scan(&self.dir, StoreKind::Raw, &ScanFilter::area(*aoi))
    }

    fn fixes_of(&self, object_id: &str) -> Result<Vec<GeoFix>, PortError> {
        scan(&self.dir, StoreKind::Raw, &ScanFilter::object(object_id))
    }

    fn object(&self, object_id: &str) -> Result<Option<MarineObject>, PortError> {
        let records: Vec<MetadataRecord> = scan(&self.dir, StoreKind::Metadata, &ScanFilter::object(object_id))?;
        // Later records supersede earlier ones.
        Ok(records.into_iter().rev().find_map(|r| match r {
            MetadataRecord::Object(o) if o.object_id == object_id => Some(o),
            _ => None,
        }))
    }
}

/// The Prediction Store. Appends are serialized in-process and take the
/// store's writer lock for their duration only, so offline batch runs can
/// interleave with serving.
#[derive(Debug)]
pub struct StoreAnomalyRepository {
    dir: DataDir,
    lock: LockOptions,
    writer: Mutex<()>,
}

impl StoreAnomalyRepository {
    pub fn new(dir: DataDir, lock: LockOptions) -> Self {
        Self { dir, lock, writer: Mutex::new(()) }
    }
}

impl AnomalyRepository for StoreAnomalyRepository {
    fn all(&self) -> Result<Vec<Anomaly>, PortError> {
        scan(&self.dir, StoreKind::Prediction, &ScanFilter::all())
    }

    fn get(&self, anomaly_id: &str) -> Result<Option<Anomaly>, PortError> {
        Ok(self.all()?.into_iter().find(|a| a.anomaly_id == anomaly_id))
    }

    fn append_new(&self, anomalies: &[Anomaly]) -> Result<usize, PortError> {
        if anomalies.is_empty() {
            return Ok(0);
        }
        let _guard = self.writer.lock().map_err(|_| PortError::Internal("writer poisoned".into()))?;
        let mut store = self.dir.open_append(StoreKind::Prediction, self.lock).map_err(port_err)?;
        let mut existing: BTreeSet<String> = store
            .scan(&ScanFilter::all())
            .map_err(port_err)?
            .filter_map(|v| v.get("anomaly_id").and_then(|x| x.as_str()).map(str::to_string))
            .collect();
        let fresh: Vec<&Anomaly> = anomalies.iter().filter(|a| existing.insert(a.anomaly_id.clone())).collect();
        if fresh.is_empty() {
            return Ok(0);
        }
        store.append(&fresh).map_err(port_err)
    }
}

#[derive(Debug)]
pub struct StoreLabelRepository {
    dir: DataDir,
    lock: LockOptions,
    writer: Mutex<()>,
}

impl StoreLabelRepository {
    pub fn new(dir: DataDir, lock: LockOptions) -> Self {
        Self { dir, lock, writer: Mutex::new(()) }
    }
}

impl LabelRepository for StoreLabelRepository {
    fn find(&self, label_id: &str) -> Result<Option<Label>, PortError> {
        let labels: Vec<Label> = scan(&self.dir, StoreKind::Label, &ScanFilter::all())?;
        Ok(labels.into_iter().find(|l| l.label_id.as_deref() == Some(label_id)))
    }

    fn append(&self, label: &Label) -> Result<(), PortError> {
        let _guard = self.writer.lock().map_err(|_| PortError::Internal("writer poisoned".into()))?;
        let mut store = self.dir.open_append(StoreKind::Label, self.lock).map_err(port_err)?;
        store.append(std::slice::from_ref(label)).map_err(port_err)?;
        Ok(())
    }
}

/// Snapshot access through the Data Store.
#[derive(Debug, Clone)]
pub struct SnapshotStorage {
    dir: DataDir,
}

impl SnapshotStorage {
    pub fn new(dir: DataDir) -> Self {
        Self { dir }
    }
}

impl StoragePort for SnapshotStorage {
    fn snapshot_ids(&self) -> Result<Vec<String>, PortError> {
        self.dir.data_store().list().map_err(port_err)
    }

    fn snapshot_fixes(&self, snapshot_id: &str) -> Result<Vec<GeoFix>, PortError> {
        self.dir.data_store().read(snapshot_id).map(|s| s.fixes).map_err(port_err)
    }
}

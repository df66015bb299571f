use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::jsonl::parse_lines;
use super::{ScanFilter, StoreError};
use crate::contract::checksum::Fnv1a;
use crate::contract::{builtin, validate_records, MANIFEST_FILE};
use crate::domain::{GeoFix, Label};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const LABELS_FILE: &str = "labels.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub snapshot_id: String,
    pub parent: Option<String>,
    pub pipeline: String,
    pub seed: Option<u64>,
    pub params: Value,
    pub record_count: usize,
    #[serde(default)]
    pub label_count: usize,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub manifest: SnapshotManifest,
    pub fixes: Vec<GeoFix>,
    pub labels: Vec<Label>,
}

/// The Data Store: immutable, content-addressed pipeline outputs.
#[derive(Debug, Clone)]
pub struct DataStore {
    root: PathBuf,
}

fn to_jsonl<T: Serialize>(items: &[T]) -> Result<(Vec<Value>, Vec<u8>), StoreError> {
    let mut values = Vec::with_capacity(items.len());
    let mut bytes = Vec::new();
    for item in items {
        let v = serde_json::to_value(item)?;
        serde_json::to_writer(&mut bytes, &v)?;
        bytes.push(b'\n');
        values.push(v);
    }
    Ok((values, bytes))
}

fn content_checksum(train: &[u8], labels: &[u8]) -> String {
    let mut h = Fnv1a::default();
    h.update(train);
    h.update(b"\0");
    h.update(labels);
    h.hex()
}

impl DataStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, snapshot_id: &str) -> PathBuf {
        self.root.join(snapshot_id)
    }

    /// Write a snapshot. The id is derived from content, parameters and
    /// parent, so writing the same inputs twice is a no-op returning the
    /// existing manifest.
    pub fn write(
        &self,
        pipeline: &str,
        seed: Option<u64>,
        params: Value,
        parent: Option<&str>,
        fixes: &[GeoFix],
        labels: &[Label],
    ) -> Result<SnapshotManifest, StoreError> {
        let (fix_values, train) = to_jsonl(fixes)?;
        let (label_values, label_bytes) = to_jsonl(labels)?;
        let mut violations = validate_records(&builtin::snapshot_fix(), &fix_values)?;
        violations.extend(
            validate_records(&builtin::label(), &label_values)?
                .into_iter()
                .map(|v| v.prefixed(LABELS_FILE)),
        );
        if !violations.is_empty() {
            return Err(StoreError::Contract(violations));
        }

        let checksum = content_checksum(&train, &label_bytes);
        let mut id_hash = Fnv1a::default();
        id_hash.update(checksum.as_bytes());
        id_hash.update(serde_json::to_string(&params)?.as_bytes());
        id_hash.update(parent.unwrap_or("").as_bytes());
        id_hash.update(seed.map(|s| s.to_string()).unwrap_or_default().as_bytes());
        let snapshot_id = format!("{pipeline}-{}", &id_hash.hex()[..12]);

        let manifest = SnapshotManifest {
            snapshot_id: snapshot_id.clone(),
            parent: parent.map(str::to_string),
            pipeline: pipeline.to_string(),
            seed,
            params,
            record_count: fixes.len(),
            label_count: labels.len(),
            checksum,
        };

        let target = self.dir(&snapshot_id);
        if target.exists() {
            let existing = self.manifest(&snapshot_id)?;
            if existing.checksum != manifest.checksum {
                return Err(StoreError::Integrity(format!("snapshot {snapshot_id} exists with different content")));
            }
            return Ok(existing);
        }

        fs::create_dir_all(&self.root)?;
        let staging = self.root.join(format!(".staging-{snapshot_id}-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        let write_all = || -> Result<(), StoreError> {
            write_synced(&staging.join(TRAIN_FILE), &train)?;
            write_synced(&staging.join(LABELS_FILE), &label_bytes)?;
            let mut m = serde_json::to_vec_pretty(&manifest)?;
            m.push(b'\n');
            write_synced(&staging.join(MANIFEST_FILE), &m)?;
            fs::rename(&staging, &target)?;
            Ok(())
        };
        if let Err(e) = write_all() {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
        Ok(manifest)
    }

    pub fn manifest(&self, snapshot_id: &str) -> Result<SnapshotManifest, StoreError> {
        let path = self.dir(snapshot_id).join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => StoreError::NotFound(format!("snapshot {snapshot_id}")),
            _ => e.into(),
        })?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Load a snapshot, re-verifying its content checksum.
    pub fn read(&self, snapshot_id: &str) -> Result<Snapshot, StoreError> {
        let manifest = self.manifest(snapshot_id)?;
        let dir = self.dir(snapshot_id);
        let train = fs::read(dir.join(TRAIN_FILE))?;
        let labels = fs::read(dir.join(LABELS_FILE))?;
        if content_checksum(&train, &labels) != manifest.checksum {
            return Err(StoreError::Integrity(format!("snapshot {snapshot_id} checksum mismatch")));
        }
        let fixes = parse_lines(&train, &ScanFilter::all()).typed()?;
        let labels = parse_lines(&labels, &ScanFilter::all()).typed()?;
        Ok(Snapshot { manifest, fixes, labels })
    }

    /// Manifests from `snapshot_id` back to its root ancestor.
    pub fn lineage(&self, snapshot_id: &str) -> Result<Vec<SnapshotManifest>, StoreError> {
        let mut chain = vec![self.manifest(snapshot_id)?];
        while let Some(parent) = chain.last().and_then(|m| m.parent.clone()) {
            if chain.iter().any(|m| m.snapshot_id == parent) {
                return Err(StoreError::Integrity(format!("snapshot lineage cycle at {parent}")));
            }
            chain.push(self.manifest(&parent)?);
        }
        Ok(chain)
    }

    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let mut out = Vec::new();
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for entry in entries {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !name.starts_with('.') && entry.path().join(MANIFEST_FILE).is_file() {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }
}

pub(crate) fn write_synced(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    use std::io::Write;
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Annotator, AnomalyKind, ObjectType, Source, TimeWindow, Verdict};
    use serde_json::json;

    fn fixes() -> Vec<GeoFix> {
        (0..5)
            .map(|i| GeoFix {
                object_id: "v1".into(),
                lat: 10.0 + i as f64 * 0.01,
                lon: 20.0,
                timestamp: 1_000 + 60 * i,
                sog: Some(10.0),
                cog: None,
                source: Source::Synthetic,
                object_type: ObjectType::Vessel,
            })
            .collect()
    }

    fn labels() -> Vec<Label> {
        vec![Label {
            label_id: None,
            object_id: "v1".into(),
            window: TimeWindow { start_ts: 1_000, end_ts: 1_120 },
            verdict: Verdict::Anomalous,
            kind: Some(AnomalyKind::AisGap),
            annotator: Annotator::Provider,
            note: None,
        }]
    }

    #[test]
    fn write_read_round_trip_and_idempotence() {
        let tmp = tempfile::tempdir().unwrap();
        let store = DataStore::new(tmp.path());
        let a = store.write("synth", Some(42), json!({"n": 1}), None, &fixes(), &labels()).unwrap();
        let b = store.write("synth", Some(42), json!({"n": 1}), None, &fixes(), &labels()).unwrap();
        assert_eq!(a, b);
        let snap = store.read(&a.snapshot_id).unwrap();
        assert_eq!((snap.fixes, snap.labels), (fixes(), labels()));
        assert_eq!(store.list().unwrap(), vec![a.snapshot_id.clone()]);
    }

    #[test]
    fn different_params_give_different_ids() {
        let tmp = tempfile::tempdir().unwrap();
        let store = DataStore::new(tmp.path());
        let a = store.write("synth", Some(1), json!({}), None, &fixes(), &[]).unwrap();
        let b = store.write("augment", Some(1), json!({"jitter": 0}), Some(&a.snapshot_id), &fixes(), &[]).unwrap();
        assert_ne!(a.snapshot_id, b.snapshot_id);
        let chain = store.lineage(&b.snapshot_id).unwrap();
        assert_eq!(chain.iter().map(|m| m.snapshot_id.as_str()).collect::<Vec<_>>(), vec![&b.snapshot_id, &a.snapshot_id]);
    }

    #[test]
    fn tampered_snapshot_is_detected() {
        let tmp = tempfile::tempdir().unwrap();
        let store = DataStore::new(tmp.path());
        let m = store.write("synth", None, json!({}), None, &fixes(), &[]).unwrap();
        let path = store.dir(&m.snapshot_id).join(TRAIN_FILE);
        let text = fs::read_to_string(&path).unwrap().replace("10.0", "10.5");
        fs::write(&path, text).unwrap();
        assert!(matches!(store.read(&m.snapshot_id), Err(StoreError::Integrity(_))));
    }

    #[test]
    fn unknown_snapshot_not_found() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(DataStore::new(tmp.path()).read("nope"), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn invalid_fix_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let mut bad = fixes();
        bad[2].lat = 91.0;
        let err = DataStore::new(tmp.path()).write("synth", None, json!({}), None, &bad, &[]).unwrap_err();
        assert!(matches!(err, StoreError::Contract(v) if v[0].location == "record[2].lat"));
    }
}

//! File-backed, append-oriented stores fronted by data contracts.
//!
//! Layout under the data directory:
//!
//! ```text
//! raw.jsonl labels.jsonl metadata.jsonl predictions.jsonl telemetry.jsonl
//! data/<snapshot_id>/{train.jsonl, labels.jsonl, manifest.json}
//! registry/<name>/<version>/{manifest.json, params.json}
//! ```

mod jsonl;
mod lock;
mod metadata;
mod registry;
mod snapshot;
mod telemetry;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use jsonl::{Mode, Scan, ScanFilter, StoreHandle};
pub use lock::{LockOptions, LockOwner, WriterLock, STALE_AFTER_S};
pub use metadata::{MetadataRecord, PipelineKind, TrainingRunRecord};
pub use registry::{ContractRef, ModelEntry, ModelId, ModelKind, ModelManifest, ModelRef, Registry, StagedModel};
pub use snapshot::{DataStore, Snapshot, SnapshotManifest, LABELS_FILE, TRAIN_FILE};
pub use telemetry::{TelemetryEvent, TelemetrySink};

pub(crate) use lock::now_ts;

use crate::contract::{builtin, ContractError, DataContract, Violation};

pub const DATA_DIR_ENV: &str = "OG_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "og-data";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("json error: {0}")]
    Json(String),
    #[error("store busy: {lock} held by pid {}", owner_pid.map_or("?".to_string(), |p| p.to_string()))]
    Busy { lock: String, owner_pid: Option<u32>, acquired_ts: Option<i64> },
    #[error("{} contract violation(s): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Contract(Vec<Violation>),
    #[error(transparent)]
    ContractDef(#[from] ContractError),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("store opened read-only: {0}")]
    ReadOnly(String),
    #[error("invalid: {0}")]
    Invalid(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for StoreError {
    fn from(e: serde_json::Error) -> Self {
        StoreError::Json(e.to_string())
    }
}

/// The seven persistent stores of an installation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StoreKind {
    Label,
    Raw,
    Data,
    Metadata,
    Registry,
    Prediction,
    Telemetry,
}

impl StoreKind {
    pub const ALL: [StoreKind; 7] = [
        StoreKind::Label,
        StoreKind::Raw,
        StoreKind::Data,
        StoreKind::Metadata,
        StoreKind::Registry,
        StoreKind::Prediction,
        StoreKind::Telemetry,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StoreKind::Label => "labels",
            StoreKind::Raw => "raw",
            StoreKind::Data => "data",
            StoreKind::Metadata => "metadata",
            StoreKind::Registry => "registry",
            StoreKind::Prediction => "predictions",
            StoreKind::Telemetry => "telemetry",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "labels" | "label" => Some(StoreKind::Label),
            "raw" => Some(StoreKind::Raw),
            "data" => Some(StoreKind::Data),
            "metadata" => Some(StoreKind::Metadata),
            "registry" => Some(StoreKind::Registry),
            "predictions" | "prediction" => Some(StoreKind::Prediction),
            "telemetry" => Some(StoreKind::Telemetry),
            _ => None,
        }
    }

    /// File name for the single-file JSONL stores.
    pub fn file_name(&self) -> Option<&'static str> {
        match self {
            StoreKind::Label => Some("labels.jsonl"),
            StoreKind::Raw => Some("raw.jsonl"),
            StoreKind::Metadata => Some("metadata.jsonl"),
            StoreKind::Prediction => Some("predictions.jsonl"),
            StoreKind::Telemetry => Some("telemetry.jsonl"),
            StoreKind::Data | StoreKind::Registry => None,
        }
    }

    /// Data contract fronting the store's records. Registry entries are
    /// governed by model contracts instead.
    pub fn contract(&self) -> Option<DataContract> {
        match self {
            StoreKind::Label => Some(builtin::label()),
            StoreKind::Raw => Some(builtin::raw_fix()),
            StoreKind::Data => Some(builtin::snapshot_fix()),
            StoreKind::Metadata => Some(builtin::metadata_record()),
            StoreKind::Prediction => Some(builtin::prediction()),
            StoreKind::Telemetry => Some(builtin::telemetry_event()),
            StoreKind::Registry => None,
        }
    }
}

impl std::fmt::Display for StoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Root of an installation's stores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn from_env() -> Self {
        Self::new(std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| DEFAULT_DATA_DIR.into()))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, kind: StoreKind) -> PathBuf {
        match kind.file_name() {
            Some(file) => self.root.join(file),
            None => self.root.join(kind.as_str()),
        }
    }

    pub fn captures_dir(&self) -> PathBuf {
        self.root.join("captures")
    }

    fn jsonl_parts(&self, kind: StoreKind) -> Result<(PathBuf, DataContract), StoreError> {
        match (kind.file_name(), kind.contract()) {
            (Some(_), Some(contract)) => Ok((self.path(kind), contract)),
            _ => Err(StoreError::Invalid(format!("{kind} is not a JSONL store"))),
        }
    }

    pub fn open_read(&self, kind: StoreKind) -> Result<StoreHandle, StoreError> {
        let (path, contract) = self.jsonl_parts(kind)?;
        Ok(StoreHandle::open_read(path, kind, contract))
    }

    pub fn open_append(&self, kind: StoreKind, opts: LockOptions) -> Result<StoreHandle, StoreError> {
        let (path, contract) = self.jsonl_parts(kind)?;
        StoreHandle::open_append(path, kind, contract, opts)
    }

    pub fn data_store(&self) -> DataStore {
        DataStore::new(self.path(StoreKind::Data))
    }

    pub fn registry(&self) -> Registry {
        Registry::new(self.path(StoreKind::Registry))
    }

    /// True when nothing but (possibly) an empty directory exists.
    pub fn is_empty(&self) -> bool {
        match std::fs::read_dir(&self.root) {
            Ok(mut entries) => entries.next().is_none(),
            Err(_) => true,
        }
    }
}

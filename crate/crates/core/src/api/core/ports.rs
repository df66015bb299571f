//! Ports: the only way the service core reaches the outside world, and the
//! only surface adapters are written against.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::contract::Violation;
use crate::domain::{Anomaly, AreaOfInterest, Explanation, GeoFix, Label, MarineObject, ObjectType, Source, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PortError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("internal: {0}")]
    Internal(String),
}

/// Fixes and object metadata.
pub trait FixRepository: Send + Sync {
    /// Every fix inside the AOI (position and time), in store order.
    fn fixes_in(&self, aoi: &AreaOfInterest) -> Result<Vec<GeoFix>, PortError>;
    /// Every fix of one object.
    fn fixes_of(&self, object_id: &str) -> Result<Vec<GeoFix>, PortError>;
    /// Stored metadata for the object, `None` when it has none.
    fn object(&self, object_id: &str) -> Result<Option<MarineObject>, PortError>;
}

/// The Prediction Store as seen by the service.
pub trait AnomalyRepository: Send + Sync {
    fn all(&self) -> Result<Vec<Anomaly>, PortError>;
    fn get(&self, anomaly_id: &str) -> Result<Option<Anomaly>, PortError>;
    /// Persist anomalies whose id is not stored yet; returns how many were new.
    fn append_new(&self, anomalies: &[Anomaly]) -> Result<usize, PortError>;
}

pub trait LabelRepository: Send + Sync {
    fn find(&self, label_id: &str) -> Result<Option<Label>, PortError>;
    fn append(&self, label: &Label) -> Result<(), PortError>;
}

/// Resolve and run a registered model.
pub trait ModelPort: Send + Sync {
    /// `name[:version]`; `None` means the configured default.
    fn resolve(&self, model: Option<&str>) -> Result<String, PortError>;
    /// Detect over one object's time-ordered fixes (at least two).
    fn detect(&self, model: Option<&str>, fixes: &[GeoFix]) -> Result<Vec<Anomaly>, PortError>;
}

/// Read access to Data Store snapshots.
pub trait StoragePort: Send + Sync {
    fn snapshot_ids(&self) -> Result<Vec<String>, PortError>;
    fn snapshot_fixes(&self, snapshot_id: &str) -> Result<Vec<GeoFix>, PortError>;
}

/// Reference data from upstream providers, consulted for objects without
/// local metadata.
pub trait ReferenceDataPort: Send + Sync {
    fn lookup_object(&self, object_id: &str) -> Result<Option<MarineObject>, PortError>;
}

pub trait ConfigPort: Send + Sync {
    fn config(&self) -> ApiConfig;
}

pub trait SecurityPort: Send + Sync {
    fn authorize(&self, bearer: Option<&str>) -> bool;
}

pub trait TelemetryPort: Send + Sync {
    fn record(&self, ts: i64, endpoint: &str, latency_ms: f64, status: u16);
}

pub trait CachePort: Send + Sync {
    fn get(&self, key: &str) -> Option<Value>;
    fn put(&self, key: &str, value: Value);
    fn clear(&self);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    #[default]
    Full,
    /// Keep fired steps and steps that contributed to the score.
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    /// `name[:version]`.
    pub default_model: Option<String>,
    pub cache_ttl_s: u64,
    pub token: Option<String>,
    pub verbosity: Verbosity,
}

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MODEL: &str = "rule-detector";
pub const DEFAULT_DATA_DIR: &str = "og-data";

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            port: DEFAULT_PORT,
            data_dir: PathBuf::from(DEFAULT_DATA_DIR),
            default_model: Some(DEFAULT_MODEL.into()),
            cache_ttl_s: 30,
            token: None,
            verbosity: Verbosity::Full,
        }
    }
}

impl ApiConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.port == 0 {
            return Err("port must be in [1, 65535]".into());
        }
        Ok(())
    }
}

pub const DEFAULT_PAGE: usize = 1000;
pub const MAX_PAGE: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GeoQuery {
    pub aoi: AreaOfInterest,
    pub sources: Option<BTreeSet<Source>>,
    pub types: Option<BTreeSet<ObjectType>>,
    pub cursor: Option<String>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyQuery {
    pub aoi: AreaOfInterest,
    pub cursor: Option<String>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub next_cursor: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub object_id: String,
    pub from: i64,
    pub to: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_id: Option<String>,
    pub contract: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReceipt {
    pub label_id: String,
    pub label: Label,
}

/// Failures of service operations, each with a fixed HTTP status.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApiError {
    #[error("{message}")]
    BadRequest { message: String, violations: Vec<Violation> },
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Unavailable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::BadRequest { message: message.into(), violations: vec![] }
    }

    pub fn status(&self) -> u16 {
        match self {
            ApiError::BadRequest { .. } => 400,
            ApiError::Unauthorized => 401,
            ApiError::NotFound(_) => 404,
            ApiError::Unprocessable(_) => 422,
            ApiError::Unavailable(_) => 503,
            ApiError::Internal(_) => 500,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::BadRequest { .. } => "bad_request",
            ApiError::Unauthorized => "unauthorized",
            ApiError::NotFound(_) => "not_found",
            ApiError::Unprocessable(_) => "unprocessable",
            ApiError::Unavailable(_) => "unavailable",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl From<PortError> for ApiError {
    fn from(e: PortError) -> Self {
        match e {
            PortError::NotFound(m) => ApiError::NotFound(m),
            PortError::Unavailable(m) => ApiError::Unavailable(m),
            PortError::Invalid(m) => ApiError::bad_request(m),
            PortError::Internal(m) => ApiError::Internal(m),
        }
    }
}

/// Inbound port driven by the web adapter.
pub trait InvestigatorApi: Send + Sync {
    fn authorize(&self, bearer: Option<&str>) -> Result<(), ApiError>;
    fn geolocations(&self, query: &GeoQuery) -> Result<Page<GeoFix>, ApiError>;
    fn object(&self, object_id: &str) -> Result<MarineObject, ApiError>;
    fn trajectory(&self, object_id: &str, from_ts: Option<i64>, to_ts: Option<i64>) -> Result<Trajectory, ApiError>;
    fn anomalies(&self, query: &AnomalyQuery) -> Result<Page<Anomaly>, ApiError>;
    fn explanation(&self, anomaly_id: &str) -> Result<Explanation, ApiError>;
    fn detect(&self, request: &DetectRequest) -> Result<Vec<Anomaly>, ApiError>;
    fn post_label(&self, label: Label) -> Result<LabelReceipt, ApiError>;
    fn health(&self) -> Health;
}

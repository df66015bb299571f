//! Adapters binding the service ports to concrete technologies. Each
//! adapter type implements exactly one port.

pub mod cache;
pub mod config;
pub mod http;
pub mod memory;
pub mod model;
pub mod security;
pub mod store;
pub mod telemetry;
pub mod third_party;
pub mod web;

pub use cache::{NoCache, TtlCache};
pub use config::{config_from_env, StaticConfig};
pub use memory::{FnModel, MemoryAnomalies, MemoryFixes, MemoryLabels, MemoryReference, MemoryStorage};
pub use model::RegistryModel;
pub use security::StaticToken;
pub use store::{SnapshotStorage, StoreAnomalyRepository, StoreFixRepository, StoreLabelRepository};
pub use telemetry::{MemoryTelemetry, StoreTelemetry};
pub use third_party::{NoReference, ProviderReference};
pub use web::{system_clock, WebAdapter};

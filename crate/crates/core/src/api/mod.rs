//! API prediction service in hexagonal form: `core` holds the service and
//! its ports, `adapters` the technology bindings, and this module wires
//! them together.

pub mod adapters;
pub mod core;

use std::sync::Arc;
use std::time::Duration;

use self::adapters::*;
use self::core::{ApiConfig, CachePort, InvestigatorService, PortSet, ReferenceDataPort};
use crate::contract::builtin;
use crate::store::{DataDir, LockOptions, StoreKind, TelemetrySink};

/// Ports backed by the stores under `config.data_dir`.
pub fn store_ports(config: &ApiConfig, lock: LockOptions, reference: Arc<dyn ReferenceDataPort>) -> PortSet {
    let dir = DataDir::new(&config.data_dir);
    let cache: Arc<dyn CachePort> = if config.cache_ttl_s == 0 {
        Arc::new(NoCache)
    } else {
        Arc::new(TtlCache::new(Duration::from_secs(config.cache_ttl_s)))
    };
    PortSet {
        fixes: Arc::new(StoreFixRepository::new(dir.clone())),
        anomalies: Arc::new(StoreAnomalyRepository::new(dir.clone(), lock)),
        labels: Arc::new(StoreLabelRepository::new(dir.clone(), lock)),
        model: Arc::new(RegistryModel::new(dir.clone(), config.default_model.clone())),
        storage: Arc::new(SnapshotStorage::new(dir)),
        reference,
        config: Arc::new(StaticConfig(config.clone())),
        security: Arc::new(StaticToken::new(config.token.clone())),
        cache,
    }
}

/// The full production stack: store-backed service behind the web adapter,
/// telemetry going to the Telemetry Store.
pub fn store_web_adapter(config: &ApiConfig, lock: LockOptions, reference: Arc<dyn ReferenceDataPort>) -> WebAdapter {
    let dir = DataDir::new(&config.data_dir);
    let service = InvestigatorService::new(store_ports(config, lock, reference), builtin::api_service());
    let telemetry = StoreTelemetry::new(TelemetrySink::open(dir.path(StoreKind::Telemetry), lock));
    WebAdapter::new(Arc::new(service), Arc::new(telemetry), builtin::api_service(), system_clock())
}

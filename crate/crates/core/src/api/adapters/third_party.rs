//! Third-party API adapter: object reference data from an upstream
//! provider, read through a fetcher (fixtures in this build).

use std::collections::BTreeMap;
use std::sync::Mutex;

use crate::api::core::ports::{PortError, ReferenceDataPort};
use crate::domain::MarineObject;
use crate::ingestion::{crawl_source, Fetcher, IngestError, SourceConfig};

pub struct ProviderReference<F> {
    fetcher: F,
    source: SourceConfig,
    /// Fetched once, on first lookup.
    objects: Mutex<Option<BTreeMap<String, MarineObject>>>,
}

impl<F: Fetcher> ProviderReference<F> {
    pub fn new(fetcher: F, source: SourceConfig) -> Self {
        Self { fetcher, source, objects: Mutex::new(None) }
    }
}

impl<F: Fetcher + Send + Sync> ReferenceDataPort for ProviderReference<F> {
    fn lookup_object(&self, object_id: &str) -> Result<Option<MarineObject>, PortError> {
        let mut objects = self.objects.lock().map_err(|_| PortError::Internal("reference cache poisoned".into()))?;
        if objects.is_none() {
            let outcome = crawl_source(&self.source, &self.fetcher).map_err(|e| match e {
                IngestError::Transport { .. } => PortError::Unavailable(e.to_string()),
                other => PortError::Internal(other.to_string()),
            })?;
            *objects = Some(outcome.objects.into_iter().map(|o| (o.object_id.clone(), o)).collect());
        }
        Ok(objects.as_ref().and_then(|m| m.get(object_id).cloned()))
    }
}

/// No upstream configured.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoReference;

impl ReferenceDataPort for NoReference {
    fn lookup_object(&self, _object_id: &str) -> Result<Option<MarineObject>, PortError> {
        Ok(None)
    }
}

//! Configuration adapter.

use std::path::PathBuf;

use crate::api::core::ports::{ApiConfig, ConfigPort, Verbosity};
use crate::store::DATA_DIR_ENV;

pub const PORT_ENV: &str = "OG_PORT";
pub const TOKEN_ENV: &str = "OG_TOKEN";
pub const MODEL_ENV: &str = "OG_MODEL";
pub const CACHE_TTL_ENV: &str = "OG_CACHE_TTL";
pub const VERBOSITY_ENV: &str = "OG_EXPLAIN";

/// Build a config from an environment lookup, defaults filling the gaps.
pub fn config_from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<ApiConfig, String> {
    let mut c = ApiConfig::default();
    if let Some(p) = lookup(PORT_ENV) {
        c.port = p.parse().map_err(|_| format!("{PORT_ENV}={p} is not a port number"))?;
    }
    if let Some(d) = lookup(DATA_DIR_ENV) {
        c.data_dir = PathBuf::from(d);
    }
    if let Some(t) = lookup(TOKEN_ENV) {
        c.token = Some(t).filter(|t| !t.is_empty());
    }
    if let Some(m) = lookup(MODEL_ENV) {
        c.default_model = Some(m).filter(|m| !m.is_empty());
    }
    if let Some(t) = lookup(CACHE_TTL_ENV) {
        c.cache_ttl_s = t.parse().map_err(|_| format!("{CACHE_TTL_ENV}={t} is not a non-negative integer"))?;
    }
    if let Some(v) = lookup(VERBOSITY_ENV) {
        c.verbosity = match v.as_str() {
            "full" => Verbosity::Full,
            "summary" => Verbosity::Summary,
            _ => return Err(format!("{VERBOSITY_ENV}={v}: expected full or summary")),
        };
    }
    c.validate()?;
    Ok(c)
}

#[derive(Debug, Clone, Default)]
pub struct StaticConfig(pub ApiConfig);

impl ConfigPort for StaticConfig {
    fn config(&self) -> ApiConfig {
        self.0.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn env_overrides_and_rejects() {
        let env: HashMap<&str, &str> =
            HashMap::from([("OG_PORT", "9000"), ("OG_MODEL", "ml-detector:2"), ("OG_TOKEN", ""), ("OG_EXPLAIN", "summary")]);
        let c = config_from_env(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!((c.port, c.default_model.as_deref(), c.token, c.verbosity), (9000, Some("ml-detector:2"), None, Verbosity::Summary));
        assert!(config_from_env(|k| (k == "OG_PORT").then(|| "0".to_string())).is_err());
        assert!(config_from_env(|k| (k == "OG_PORT").then(|| "70000".to_string())).is_err());
    }
}

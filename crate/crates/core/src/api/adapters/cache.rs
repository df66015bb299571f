//! Cache adapters.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde_json::Value;

use crate::api::core::ports::CachePort;

/// Entries expire `ttl` after insertion. A zero TTL caches nothing.
#[derive(Debug)]
pub struct TtlCache {
    ttl: Duration,
    entries: Mutex<HashMap<String, (Instant, Value)>>,
}

impl TtlCache {
    pub fn new(ttl: Duration) -> Self {
        Self { ttl, entries: Mutex::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl CachePort for TtlCache {
    fn get(&self, key: &str) -> Option<Value> {
        let mut entries = self.entries.lock().unwrap();
        match entries.get(key) {
            Some((at, v)) if at.elapsed() < self.ttl => Some(v.clone()),
            Some(_) => {
                entries.remove(key);
                None
            }
            None => None,
        }
    }

    fn put(&self, key: &str, value: Value) {
        if self.ttl.is_zero() {
            return;
        }
        self.entries.lock().unwrap().insert(key.to_string(), (Instant::now(), value));
    }

    fn clear(&self) {
        self.entries.lock().unwrap().clear();
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoCache;

impl CachePort for NoCache {
    fn get(&self, _key: &str) -> Option<Value> {
        None
    }

    fn put(&self, _key: &str, _value: Value) {}

    fn clear(&self) {}
}

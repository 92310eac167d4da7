//! LRU response cache keyed by endpoint and canonical request body.

use std::num::NonZeroUsize;
use std::sync::Mutex;

use axum::body::Bytes;
use lru::LruCache;
use serde_json::Value;

use atomflow_core::canonical::canonical_json;

pub const DEFAULT_CAPACITY: usize = 1024;

pub fn cache_key(endpoint: &str, body: &Value) -> String {
    format!("{endpoint}\n{}", canonical_json(body))
}

pub struct ResponseCache {
    inner: Mutex<LruCache<String, Bytes>>,
}

impl ResponseCache {
    /// A capacity of zero is raised to one.
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity).unwrap_or(NonZeroUsize::MIN);
        Self { inner: Mutex::new(LruCache::new(cap)) }
    }

    pub fn get(&self, key: &str) -> Option<Bytes> {
        self.inner.lock().ok()?.get(key).cloned()
    }

    pub fn put(&self, key: String, value: Bytes) {
        if let Ok(mut c) = self.inner.lock() {
            c.put(key, value);
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().map(|c| c.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn key_ignores_member_order() {
        let a: Value = serde_json::from_str(r#"{"jid": "JVASP-1002", "step": 0.02}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"step": 0.02, "jid": "JVASP-1002"}"#).unwrap();
        assert_eq!(cache_key("/pxrd/query", &a), cache_key("/pxrd/query", &b));
        assert_ne!(cache_key("/pxrd/query", &a), cache_key("/alignn/query", &a));
    }

    #[test]
    fn least_recently_used_is_evicted() {
        let c = ResponseCache::new(2);
        for k in ["a", "b", "c"] {
            c.put(cache_key(k, &json!({})), Bytes::from(k));
        }
        assert!(c.get(&cache_key("a", &json!({}))).is_none());
        assert_eq!(c.get(&cache_key("c", &json!({}))).unwrap(), Bytes::from("c"));
    }
}

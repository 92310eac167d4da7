//! API keys. Only SHA-256 digests of secrets are kept in memory.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bucket::{Acquire, BucketConfig, TokenBucket};

pub fn hash_secret(secret: &str) -> String {
    hex::encode(Sha256::digest(secret.as_bytes()))
}

/// Configured key. Give either the plaintext `secret`, hashed on load, or
/// its `secret_sha256`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyConfig {
    pub key_id: String,
    #[serde(default, skip_serializing)]
    pub secret: Option<String>,
    #[serde(default)]
    pub secret_sha256: Option<String>,
    #[serde(default)]
    pub bucket: Option<BucketConfig>,
    #[serde(default = "enabled_default")]
    pub enabled: bool,
}

fn enabled_default() -> bool {
    true
}

#[derive(Debug)]
pub struct ApiKeyRecord {
    pub key_id: String,
    pub secret_hash: String,
    pub enabled: bool,
    bucket: Mutex<TokenBucket>,
}

impl ApiKeyRecord {
    /// Atomic per key: the bucket lock covers refill and deduction.
    pub fn acquire(&self, now: f64) -> Acquire {
        match self.bucket.lock() {
            Ok(mut b) => b.acquire(1.0, now),
            Err(_) => Acquire::Denied { retry_after: 1.0 },
        }
    }
}

#[derive(Debug, Default)]
pub struct KeyStore {
    by_hash: HashMap<String, ApiKeyRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KeyError {
    #[error("key '{0}' has neither secret nor secret_sha256")]
    MissingSecret(String),
    #[error("two keys share the same secret ('{0}')")]
    DuplicateSecret(String),
}

impl KeyStore {
    pub fn new(keys: &[KeyConfig], default_bucket: BucketConfig, now: f64) -> Result<Self, KeyError> {
        let mut by_hash = HashMap::new();
        for k in keys {
            let hash = match (&k.secret, &k.secret_sha256) {
                (Some(s), _) => hash_secret(s),
                (None, Some(h)) => h.to_ascii_lowercase(),
                (None, None) => return Err(KeyError::MissingSecret(k.key_id.clone())),
            };
            let record = ApiKeyRecord {
                key_id: k.key_id.clone(),
                secret_hash: hash.clone(),
                enabled: k.enabled,
                bucket: Mutex::new(TokenBucket::new(k.bucket.unwrap_or(default_bucket), now)),
            };
            if by_hash.insert(hash, record).is_some() {
                return Err(KeyError::DuplicateSecret(k.key_id.clone()));
            }
        }
        Ok(Self { by_hash })
    }

    /// The enabled record whose secret hashes to the same digest as `secret`.
    pub fn authenticate(&self, secret: &str) -> Option<&ApiKeyRecord> {
        self.by_hash.get(&hash_secret(secret)).filter(|r| r.enabled)
    }

    pub fn len(&self) -> usize {
        self.by_hash.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_hash.is_empty()
    }
}

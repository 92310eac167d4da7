//! Gateway configuration: JSON file plus `ATOMFLOW_*` environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bucket::BucketConfig;
use crate::keys::KeyConfig;

pub const ENV_PREFIX: &str = "ATOMFLOW_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Chat-completions API root, e.g. `http://localhost:8000/v1`.
    pub base_url: Option<String>,
    /// Pinned model; requests naming another model are rejected.
    pub model: String,
    /// Bearer token for `base_url`. Usually supplied through the environment.
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    /// Scripted fixture file, used when `base_url` is unset.
    pub fixtures: Option<PathBuf>,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self { base_url: None, model: "gpt-oss-20b".into(), api_key: None, fixtures: None, timeout_secs: 120 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub listen: String,
    pub bucket: BucketConfig,
    pub cache_capacity: usize,
    pub workers: usize,
    pub job_ttl_secs: u64,
    pub max_sites: usize,
    pub llm: LlmConfig,
    pub keys: Vec<KeyConfig>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            bucket: BucketConfig::default(),
            cache_capacity: crate::cache::DEFAULT_CAPACITY,
            workers: 4,
            job_ttl_secs: 3600,
            max_sites: atomflow_core::toolkit::DEFAULT_MAX_SITES,
            llm: LlmConfig::default(),
            keys: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid value for {var}: {value:?}")]
    BadEnv { var: String, value: String },
}

fn parse<T: std::str::FromStr>(var: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadEnv { var: var.into(), value: value.into() })
}

impl GatewayConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Applies overrides from `vars`. Recognized names (after the prefix):
    /// LISTEN, BUCKET_CAPACITY, BUCKET_REFILL, CACHE_CAPACITY, WORKERS,
    /// JOB_TTL_SECS, MAX_SITES, LLM_URL, LLM_MODEL, LLM_API_KEY,
    /// LLM_TIMEOUT_SECS, FIXTURES, and API_KEYS as `id:secret[,id:secret]`.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
            match key {
                "LISTEN" => self.listen = value,
                "BUCKET_CAPACITY" => self.bucket.capacity = parse(&name, &value)?,
                "BUCKET_REFILL" => self.bucket.refill_rate = parse(&name, &value)?,
                "CACHE_CAPACITY" => self.cache_capacity = parse(&name, &value)?,
                "WORKERS" => self.workers = parse(&name, &value)?,
                "JOB_TTL_SECS" => self.job_ttl_secs = parse(&name, &value)?,
                "MAX_SITES" => self.max_sites = parse(&name, &value)?,
                "LLM_URL" => self.llm.base_url = Some(value),
                "LLM_MODEL" => self.llm.model = value,
                "LLM_API_KEY" => self.llm.api_key = Some(value),
                "LLM_TIMEOUT_SECS" => self.llm.timeout_secs = parse(&name, &value)?,
                "FIXTURES" => self.llm.fixtures = Some(PathBuf::from(value)),
                "API_KEYS" => {
                    for pair in value.split(',').filter(|p| !p.trim().is_empty()) {
                        let (id, secret) = pair
                            .split_once(':')
                            .ok_or_else(|| ConfigError::BadEnv { var: name.clone(), value: "<redacted>".into() })?;
                        self.keys.push(KeyConfig {
                            key_id: id.trim().into(),
                            secret: Some(secret.trim().into()),
                            secret_sha256: None,
                            bucket: None,
                            enabled: true,
                        });
                    }
                }
                _ => tracing::warn!(var = %name, "ignoring unknown configuration variable"),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_files() {
        let c: GatewayConfig = serde_json::from_str(r#"{"workers": 2, "bucket": {"capacity": 10, "refill_rate": 1}}"#).unwrap();
        assert_eq!(c.workers, 2);
        assert_eq!(c.bucket, BucketConfig { capacity: 10.0, refill_rate: 1.0 });
        assert_eq!(c.cache_capacity, 1024);
        assert_eq!(c.job_ttl_secs, 3600);
    }

    #[test]
    fn environment_overrides() {
        let mut c = GatewayConfig::default();
        let vars = [
            ("ATOMFLOW_WORKERS", "8"),
            ("ATOMFLOW_API_KEYS", "alice:one, bob:two"),
            ("ATOMFLOW_LLM_MODEL", "pinned-1"),
            ("HOME", "/root"),
        ];
        c.apply_env(vars.iter().map(|(a, b)| (a.to_string(), b.to_string()))).unwrap();
        assert_eq!(c.workers, 8);
        assert_eq!(c.keys.len(), 2);
        assert_eq!(c.keys[1].key_id, "bob");
        assert_eq!(c.llm.model, "pinned-1");
        let bad = c.apply_env([("ATOMFLOW_WORKERS".to_string(), "many".to_string())]);
        assert!(matches!(bad, Err(ConfigError::BadEnv { .. })));
    }
}

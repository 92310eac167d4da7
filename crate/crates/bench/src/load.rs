//! Concurrent virtual clients with staggered starts and latency statistics.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;
use tokio::task::JoinSet;
use tokio::time::Instant;

use crate::stats::{mean, nearest_rank};

/// Injected latency for the stub target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StubProfile {
    Constant { latency: Duration },
    /// Request k, counted across all clients in issue order, waits
    /// `latencies[k % len]`.
    Cycle { latencies: Vec<Duration> },
}

impl StubProfile {
    /// `constant:<ms>`, `range:<lo>:<hi>` (every millisecond from lo to hi)
    /// or `list:<ms>,<ms>,...`.
    pub fn parse(text: &str) -> Result<Self, LoadError> {
        let bad = || LoadError::BadProfile(text.to_string());
        let ms = |s: &str| s.trim().parse::<f64>().ok().filter(|x| x.is_finite() && *x >= 0.0).map(|x| Duration::from_secs_f64(x / 1e3));
        let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
        match kind {
            "constant" => Ok(Self::Constant { latency: ms(rest).ok_or_else(bad)? }),
            "range" => {
                let (lo, hi) = rest.split_once(':').ok_or_else(bad)?;
                let (lo, hi): (u64, u64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
                if lo > hi {
                    return Err(bad());
                }
                Ok(Self::Cycle { latencies: (lo..=hi).map(Duration::from_millis).collect() })
            }
            "list" => {
                let latencies = rest.split(',').map(|s| ms(s).ok_or_else(bad)).collect::<Result<Vec<_>, _>>()?;
                Ok(Self::Cycle { latencies })
            }
            _ => Err(bad()),
        }
    }

    fn latency(&self, k: usize) -> Duration {
        match self {
            Self::Constant { latency } => *latency,
            Self::Cycle { latencies } if latencies.is_empty() => Duration::ZERO,
            Self::Cycle { latencies } => latencies[k % latencies.len()],
        }
    }
}

#[derive(Debug, Clone)]
pub enum Target {
    Stub(StubProfile),
    /// POSTs `body` to `url`, with a bearer key when given.
    Http { url: String, api_key: Option<String>, body: serde_json::Value },
}

/// Invariant: `p50 <= p95 <= max`; statistics cover every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub n_users: usize,
    pub requests_per_user: usize,
    pub ramp: f64,
    /// Seconds, ascending.
    pub latencies: Vec<f64>,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
    /// Requests that failed or returned a non-2xx status; their latency is
    /// still counted.
    pub errors: usize,
}

impl LoadReport {
    /// Order-independent: the samples are sorted before any statistic.
    pub fn from_samples(n_users: usize, requests_per_user: usize, ramp: f64, mut latencies: Vec<f64>, errors: usize) -> Option<Self> {
        latencies.sort_by(f64::total_cmp);
        Some(Self {
            mean: mean(&latencies)?,
            p50: nearest_rank(&latencies, 50.0)?,
            p95: nearest_rank(&latencies, 95.0)?,
            max: *latencies.last()?,
            n_users,
            requests_per_user,
            ramp,
            latencies,
            errors,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("at least one user is required")]
    NoUsers,
    #[error("each user must issue at least one request")]
    NoRequests,
    #[error("ramp must be a finite, non-negative number of seconds")]
    BadRamp,
    #[error("unrecognized stub profile '{0}'")]
    BadProfile(String),
    #[error("http client: {0}")]
    Client(String),
}

#[derive(Default)]
struct Samples {
    latencies: Vec<f64>,
    errors: usize,
}

/// User `u` starts at `ramp · u / n_users` seconds and issues its requests
/// back to back. Latency is measured end to end on the Tokio clock, so a
/// paused runtime makes stub statistics exact.
pub async fn load_sim(target: &Target, n_users: usize, ramp: f64, requests_per_user: usize) -> Result<LoadReport, LoadError> {
    if n_users == 0 {
        return Err(LoadError::NoUsers);
    }
    if requests_per_user == 0 {
        return Err(LoadError::NoRequests);
    }
    if !(ramp.is_finite() && ramp >= 0.0) {
        return Err(LoadError::BadRamp);
    }
    let client = match target {
        Target::Http { .. } => Some(reqwest::Client::builder().build().map_err(|e| LoadError::Client(e.to_string()))?),
        Target::Stub(_) => None,
    };
    let issued = Arc::new(AtomicUsize::new(0));
    let samples = Arc::new(Mutex::new(Samples::default()));
    let start = Instant::now();
    let mut set = JoinSet::new();
    for u in 0..n_users {
        let offset = Duration::from_secs_f64(ramp * u as f64 / n_users as f64);
        let (target, client, issued, samples) = (target.clone(), client.clone(), Arc::clone(&issued), Arc::clone(&samples));
        set.spawn(async move {
            tokio::time::sleep_until(start + offset).await;
            for _ in 0..requests_per_user {
                let t0 = Instant::now();
                let ok = match (&target, &client) {
                    (Target::Stub(profile), _) => {
                        tokio::time::sleep(profile.latency(issued.fetch_add(1, Ordering::SeqCst))).await;
                        true
                    }
                    (Target::Http { url, api_key, body }, Some(c)) => {
                        let mut req = c.post(url).header("content-type", "application/json").body(body.to_string());
                        if let Some(k) = api_key {
                            req = req.bearer_auth(k);
                        }
                        match req.send().await {
                            Ok(resp) => {
                                let ok = resp.status().is_success();
                                resp.bytes().await.is_ok() && ok
                            }
                            Err(_) => false,
                        }
                    }
                    (Target::Http { .. }, None) => false,
                };
                let elapsed = t0.elapsed().as_secs_f64();
                let mut s = samples.lock().await;
                s.latencies.push(elapsed);
                s.errors += usize::from(!ok);
            }
        });
    }
    while set.join_next().await.is_some() {}
    let s = std::mem::take(&mut *samples.lock().await);
    LoadReport::from_samples(n_users, requests_per_user, ramp, s.latencies, s.errors).ok_or(LoadError::NoRequests)
}

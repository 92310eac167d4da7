//! Token throughput of streamed completions and speedup ratios.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use atomflow_core::agent::{BackendError, ChatMessage, LlmBackend, LlmParams};

use crate::stats::{mean, population_std};

/// Monotonic seconds. Injected so tests can drive simulated time.
pub trait MonotonicClock: Send + Sync {
    fn now(&self) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl MonotonicClock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpsRun {
    /// Non-empty streamed deltas.
    pub completion_tokens: u32,
    /// Seconds from the first delta to the last.
    pub elapsed: f64,
}

impl TpsRun {
    pub fn tps(&self) -> f64 {
        f64::from(self.completion_tokens) / self.elapsed
    }
}

/// Invariant: `runs` is non-empty and `mean_tps` is the mean of per-run rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpsResult {
    pub model: String,
    pub runs: Vec<TpsRun>,
    pub mean_tps: f64,
    /// Population standard deviation of per-run rates.
    pub std_tps: f64,
}

impl TpsResult {
    pub fn from_runs(model: impl Into<String>, runs: Vec<TpsRun>) -> Result<Self, TpsError> {
        if runs.is_empty() {
            return Err(TpsError::InvalidRuns);
        }
        let rates: Vec<f64> = runs.iter().map(TpsRun::tps).collect();
        let mean_tps = mean(&rates).unwrap_or_default();
        let std_tps = population_std(&rates).unwrap_or_default();
        Ok(Self { model: model.into(), runs, mean_tps, std_tps })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TpsError {
    #[error("at least one run is required")]
    InvalidRuns,
    #[error("at least one prompt is required")]
    NoPrompts,
    #[error("run {run} streamed {tokens} tokens; two or more are needed to time generation")]
    TooFewTokens { run: usize, tokens: u32 },
    #[error("run {run}: first and last token arrived at the same instant")]
    ZeroElapsed { run: usize },
    #[error("run {run}: {source}")]
    Backend { run: usize, source: BackendError },
    #[error("baseline throughput must be positive, got {0}")]
    BadBaseline(f64),
}

/// Streams `n_runs` completions, cycling through `prompts`. The clock starts
/// at the first delta, so queueing and prompt processing are excluded.
pub async fn measure_tps(
    backend: &dyn LlmBackend,
    params: &LlmParams,
    prompts: &[String],
    n_runs: usize,
    clock: &dyn MonotonicClock,
) -> Result<TpsResult, TpsError> {
    if n_runs == 0 {
        return Err(TpsError::InvalidRuns);
    }
    if prompts.is_empty() {
        return Err(TpsError::NoPrompts);
    }
    let mut runs = Vec::with_capacity(n_runs);
    for run in 0..n_runs {
        let messages = [ChatMessage::user(prompts[run % prompts.len()].clone())];
        let mut tokens = 0u32;
        let mut first: Option<f64> = None;
        let mut last = 0.0;
        let mut sink = |delta: &str| {
            if delta.is_empty() {
                return;
            }
            let t = clock.now();
            first.get_or_insert(t);
            last = t;
            tokens += 1;
        };
        backend.chat_stream(&messages, params, &mut sink).await.map_err(|source| TpsError::Backend { run, source })?;
        if tokens < 2 {
            return Err(TpsError::TooFewTokens { run, tokens });
        }
        let elapsed = last - first.unwrap_or(last);
        if elapsed <= 0.0 {
            return Err(TpsError::ZeroElapsed { run });
        }
        runs.push(TpsRun { completion_tokens: tokens, elapsed });
    }
    TpsResult::from_runs(params.model.clone(), runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpeed {
    pub model: String,
    pub mean_tps: f64,
}

impl ModelSpeed {
    pub fn new(model: impl Into<String>, mean_tps: f64) -> Self {
        Self { model: model.into(), mean_tps }
    }
}

impl From<&TpsResult> for ModelSpeed {
    fn from(r: &TpsResult) -> Self {
        Self::new(r.model.clone(), r.mean_tps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub model: String,
    pub mean_tps: f64,
    /// Ratio to the baseline, rounded to 2 decimals.
    pub speedup: f64,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Baseline row first with speedup 1.00, then `others` in order.
pub fn speedup_table(baseline: &ModelSpeed, others: &[ModelSpeed]) -> Result<Vec<SpeedupRow>, TpsError> {
    if !(baseline.mean_tps.is_finite() && baseline.mean_tps > 0.0) {
        return Err(TpsError::BadBaseline(baseline.mean_tps));
    }
    Ok(std::iter::once(baseline)
        .chain(others)
        .map(|m| SpeedupRow { model: m.model.clone(), mean_tps: m.mean_tps, speedup: round2(m.mean_tps / baseline.mean_tps) })
        .collect())
}

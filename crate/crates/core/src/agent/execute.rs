//! Concurrent execution of a validated plan with data passing, retries and
//! failure propagation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::task::JoinSet;

use super::plan::{resolve_template, validate_plan, WorkflowPlan};
use super::{AgentEvent, EventSink};
use crate::clock::{Clock, SystemClock};
use crate::toolkit::{FailureKind, Registry, ToolError};

/// Exponential delay schedule for retrying transient failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
    pub factor: f64,
    pub max: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Self { base: Duration::from_millis(500), factor: 2.0, max: Duration::from_secs(8) }
    }
}

impl Backoff {
    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let scaled = self.base.as_secs_f64() * self.factor.powi(retry.saturating_sub(1) as i32);
        Duration::from_secs_f64(scaled.min(self.max.as_secs_f64()))
    }
}

#[derive(Clone)]
pub struct ExecPolicy {
    pub max_retries: u32,
    pub step_timeout: Duration,
    pub max_parallel: usize,
    pub backoff: Backoff,
    pub clock: Arc<dyn Clock>,
}

impl Default for ExecPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            step_timeout: Duration::from_secs(60),
            max_parallel: 4,
            backoff: Backoff::default(),
            clock: Arc::new(SystemClock),
        }
    }
}

impl std::fmt::Debug for ExecPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExecPolicy")
            .field("max_retries", &self.max_retries)
            .field("step_timeout", &self.step_timeout)
            .field("max_parallel", &self.max_parallel)
            .field("backoff", &self.backoff)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepError {
    pub code: String,
    pub kind: FailureKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

impl StepError {
    fn from_tool(e: &ToolError) -> Self {
        Self { code: e.code().to_string(), kind: e.kind(), message: e.to_string(), hint: e.hint() }
    }

    fn new(code: &str, kind: FailureKind, message: impl Into<String>) -> Self {
        Self { code: code.into(), kind, message: message.into(), hint: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepOutcome {
    Success { result: Value },
    Failed { error: StepError },
    /// Not run because a step it depends on, directly or transitively, failed.
    SkippedFailed { failed_dependency: u32 },
}

impl StepOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, StepOutcome::Success { .. })
    }

    pub fn result(&self) -> Option<&Value> {
        match self {
            StepOutcome::Success { result } => Some(result),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_id: u32,
    pub tool: String,
    /// Arguments after placeholder substitution; null when resolution failed
    /// or the step was skipped.
    pub resolved_arguments: Value,
    pub outcome: StepOutcome,
    /// Handler invocations, at most `max_retries + 1`.
    pub attempts: u32,
    pub started_ms: u64,
    pub ended_ms: u64,
}

fn emit(events: Option<&EventSink>, e: AgentEvent) {
    if let Some(tx) = events {
        let _ = tx.send(e);
    }
}

/// Runs every step of `plan` and returns one record per step, sorted by
/// step id. Failures are reported in the records, never as an error.
pub async fn execute(
    plan: &WorkflowPlan,
    registry: Arc<Registry>,
    policy: &ExecPolicy,
    events: Option<&EventSink>,
) -> Vec<StepRecord> {
    let now = || policy.clock.now_ms();
    if let Err(e) = validate_plan(plan, &registry) {
        let t = now();
        let mut out: Vec<StepRecord> = plan
            .steps
            .iter()
            .map(|s| StepRecord {
                step_id: s.step_id,
                tool: s.tool.clone(),
                resolved_arguments: Value::Null,
                outcome: StepOutcome::Failed { error: StepError::new("invalid_plan", FailureKind::InvalidInput, e.to_string()) },
                attempts: 0,
                started_ms: t,
                ended_ms: t,
            })
            .collect();
        out.sort_by_key(|r| r.step_id);
        return out;
    }

    let mut pending: BTreeMap<u32, BTreeSet<u32>> =
        plan.steps.iter().map(|s| (s.step_id, s.depends_on.iter().copied().collect())).collect();
    let mut dependents: HashMap<u32, Vec<u32>> = HashMap::new();
    for s in &plan.steps {
        for &d in &s.depends_on {
            dependents.entry(d).or_default().push(s.step_id);
        }
    }
    let mut results: HashMap<u32, Value> = HashMap::new();
    let mut records: BTreeMap<u32, StepRecord> = BTreeMap::new();
    let mut running: JoinSet<StepRecord> = JoinSet::new();
    let max_parallel = policy.max_parallel.max(1);

    loop {
        // launch ready steps in id order
        let ready: Vec<u32> = pending.iter().filter(|(_, deps)| deps.is_empty()).map(|(&id, _)| id).collect();
        for id in ready {
            if running.len() >= max_parallel {
                break;
            }
            if pending.remove(&id).is_none() {
                continue;
            }
            let step = plan.step(id).expect("pending ids come from the plan");
            let started = now();
            emit(events, AgentEvent::StepStarted { step_id: id, tool: step.tool.clone() });
            match resolve_template(&step.argument_template, &results) {
                Ok(args) => {
                    let registry = Arc::clone(&registry);
                    let policy = policy.clone();
                    let tool = step.tool.clone();
                    running.spawn(async move { run_step(id, tool, args, registry, &policy, started).await });
                }
                Err(e) => {
                    let record = StepRecord {
                        step_id: id,
                        tool: step.tool.clone(),
                        resolved_arguments: Value::Null,
                        outcome: StepOutcome::Failed {
                            error: StepError::new("unresolved_placeholder", FailureKind::InvalidInput, e.to_string()),
                        },
                        attempts: 0,
                        started_ms: started,
                        ended_ms: now(),
                    };
                    finish(record, plan, &mut pending, &dependents, &mut results, &mut records, events, now());
                }
            }
        }
        if running.is_empty() {
            if pending.values().any(|d| d.is_empty()) {
                continue;
            }
            break;
        }
        let record = match running.join_next().await {
            Some(Ok(r)) => r,
            Some(Err(e)) => panic!("step task panicked: {e}"),
            None => break,
        };
        finish(record, plan, &mut pending, &dependents, &mut results, &mut records, events, now());
    }
    records.into_values().collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    record: StepRecord,
    plan: &WorkflowPlan,
    pending: &mut BTreeMap<u32, BTreeSet<u32>>,
    dependents: &HashMap<u32, Vec<u32>>,
    results: &mut HashMap<u32, Value>,
    records: &mut BTreeMap<u32, StepRecord>,
    events: Option<&EventSink>,
    t: u64,
) {
    let id = record.step_id;
    emit(events, AgentEvent::StepFinished { record: record.clone() });
    let ok = match &record.outcome {
        StepOutcome::Success { result } => {
            results.insert(id, result.clone());
            true
        }
        _ => false,
    };
    records.insert(id, record);
    let next = dependents.get(&id).map(Vec::as_slice).unwrap_or(&[]);
    if ok {
        for d in next {
            if let Some(deps) = pending.get_mut(d) {
                deps.remove(&id);
            }
        }
        return;
    }
    // skip every transitive dependent, attributing it to the root failure
    let mut stack: Vec<u32> = next.to_vec();
    while let Some(d) = stack.pop() {
        if pending.remove(&d).is_none() {
            continue;
        }
        let step = plan.step(d).expect("dependents come from the plan");
        let skipped = StepRecord {
            step_id: d,
            tool: step.tool.clone(),
            resolved_arguments: Value::Null,
            outcome: StepOutcome::SkippedFailed { failed_dependency: id },
            attempts: 0,
            started_ms: t,
            ended_ms: t,
        };
        emit(events, AgentEvent::StepFinished { record: skipped.clone() });
        records.insert(d, skipped);
        stack.extend(dependents.get(&d).map(Vec::as_slice).unwrap_or(&[]));
    }
}

async fn run_step(id: u32, tool: String, args: Value, registry: Arc<Registry>, policy: &ExecPolicy, started: u64) -> StepRecord {
    let mut attempts = 0;
    let outcome = loop {
        attempts += 1;
        let (r, t, a) = (Arc::clone(&registry), tool.clone(), args.clone());
        let call = tokio::task::spawn_blocking(move || r.invoke(&t, &a));
        let error = match tokio::time::timeout(policy.step_timeout, call).await {
            Ok(Ok(Ok(result))) => break StepOutcome::Success { result },
            Ok(Ok(Err(e))) => StepError::from_tool(&e),
            Ok(Err(join)) => StepError::new("internal", FailureKind::Internal, format!("tool panicked: {join}")),
            Err(_) => StepError::new(
                "timeout",
                FailureKind::Transient,
                format!("'{tool}' did not finish within {:?}", policy.step_timeout),
            ),
        };
        if error.kind != FailureKind::Transient || attempts > policy.max_retries {
            break StepOutcome::Failed { error };
        }
        tracing::debug!(step = id, attempt = attempts, code = %error.code, "retrying transient failure");
        tokio::time::sleep(policy.backoff.delay(attempts)).await;
    };
    StepRecord { step_id: id, tool, resolved_arguments: args, outcome, attempts, started_ms: started, ended_ms: policy.clock.now_ms() }
}

//! The full pipeline: plan, execute, summarize.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{BackendError, LlmBackend};
use super::execute::{execute, ExecPolicy, StepRecord};
use super::messages::LlmParams;
use super::plan::WorkflowPlan;
use super::planner::{plan, PlanPolicy, PlanningError};
use super::summarize::summarize;
use super::{AgentEvent, EventSink};
use crate::toolkit::Registry;

#[derive(Debug, Clone, Default)]
pub struct AgentPolicy {
    pub plan: PlanPolicy,
    pub exec: ExecPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub answer: String,
    pub plan: WorkflowPlan,
    /// One record per plan step, sorted by step id.
    pub trace: Vec<StepRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error("summarization failed: {0}")]
    Summarize(BackendError),
}

fn emit(events: Option<&EventSink>, e: AgentEvent) {
    if let Some(tx) = events {
        let _ = tx.send(e);
    }
}

/// With a deterministic backend and a fixed clock the response is a pure
/// function of the query, the registry and the policy.
pub async fn run_agent(
    query: &str,
    registry: Arc<Registry>,
    backend: &dyn LlmBackend,
    params: &LlmParams,
    policy: &AgentPolicy,
    events: Option<&EventSink>,
) -> Result<AgentResponse, AgentError> {
    let planned = plan(query, &registry, backend, params, &policy.plan).await?;
    emit(events, AgentEvent::Plan { plan: planned.plan.clone() });
    let mut warnings = planned.warnings;

    let response = if let Some(answer) = planned.direct_answer {
        emit(events, AgentEvent::Token { text: answer.clone() });
        AgentResponse { answer, plan: planned.plan, trace: Vec::new(), warnings }
    } else {
        let trace = execute(&planned.plan, registry, &policy.exec, events).await;
        let summary = summarize(query, &trace, backend, params, events).await.map_err(AgentError::Summarize)?;
        warnings.extend(summary.warnings);
        AgentResponse { answer: summary.text, plan: planned.plan, trace, warnings }
    };
    emit(events, AgentEvent::Final { response: response.clone() });
    Ok(response)
}

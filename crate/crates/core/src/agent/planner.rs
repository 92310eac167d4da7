//! Planning phase: prompt, parse, and retry with corrective messages.

use std::collections::HashSet;

use thiserror::Error;

use super::backend::{BackendError, LlmBackend};
use super::context::prune_context;
use super::messages::{ChatMessage, LlmParams};
use super::parse::{parse_tool_call, Directive, ParseError};
use super::plan::{PlanStep, WorkflowPlan};
use super::prompt::planner_messages;
use crate::toolkit::Registry;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanPolicy {
    /// Parse failures tolerated before giving up; backend calls are bounded
    /// by `max_retries + 1`.
    pub max_retries: u32,
    /// Token budget for the planner conversation.
    pub context_budget: usize,
}

impl Default for PlanPolicy {
    fn default() -> Self {
        Self { max_retries: 3, context_budget: 16_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Planned {
    pub plan: WorkflowPlan,
    /// Set when the model answered without tools.
    pub direct_answer: Option<String>,
    /// Backend calls made, including the successful one.
    pub calls: u32,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanningError {
    #[error("the tool registry is empty")]
    EmptyRegistry,
    #[error("planning failed after {attempts} attempts: {last_error}")]
    PlanningFailed { attempts: u32, last_error: ParseError },
    #[error("backend error during planning: {0}")]
    Backend(BackendError),
}

/// Asks the model for a plan. A single tool call becomes a one-step plan and
/// a final answer becomes an empty plan with `direct_answer` set.
pub async fn plan(
    query: &str,
    registry: &Registry,
    backend: &dyn LlmBackend,
    params: &LlmParams,
    policy: &PlanPolicy,
) -> Result<Planned, PlanningError> {
    if registry.is_empty() {
        return Err(PlanningError::EmptyRegistry);
    }
    let mut history = planner_messages(query, registry);
    let mut warnings = Vec::new();
    let mut calls = 0;
    loop {
        let pruned = prune_context(&history, policy.context_budget, &HashSet::new());
        if let Some(w) = pruned.warning {
            warnings.push(w.to_string());
        }
        calls += 1;
        let response = backend.chat(&pruned.messages, params).await.map_err(PlanningError::Backend)?;
        let error = match parse_tool_call(&response.text, registry) {
            Ok(Directive::Plan(plan)) => return Ok(Planned { plan, direct_answer: None, calls, warnings }),
            Ok(Directive::Tool(call)) => {
                let step = PlanStep {
                    step_id: 1,
                    tool: call.tool,
                    argument_template: call.arguments,
                    depends_on: Vec::new(),
                    rationale: "single tool call".into(),
                };
                return Ok(Planned { plan: WorkflowPlan { steps: vec![step] }, direct_answer: None, calls, warnings });
            }
            Ok(Directive::Final(answer)) => {
                return Ok(Planned { plan: WorkflowPlan::default(), direct_answer: Some(answer), calls, warnings })
            }
            Err(e) => e,
        };
        tracing::debug!(attempt = calls, error = %error, "planner reply rejected");
        if calls > policy.max_retries {
            return Err(PlanningError::PlanningFailed { attempts: calls, last_error: error });
        }
        history.push(ChatMessage::assistant(response.text));
        history.push(ChatMessage::user(error.retry_message()));
    }
}

//! Planner, executor and summarizer pipeline over a pluggable chat backend.

pub mod backend;
pub mod context;
pub mod execute;
pub mod messages;
pub mod parse;
pub mod plan;
pub mod planner;
pub mod prompt;
pub mod remote;
pub mod run;
pub mod summarize;

use serde::Serialize;
use tokio::sync::mpsc::UnboundedSender;

pub use backend::{fixture_key, token_pieces, BackendError, DeltaSink, FnBackend, LlmBackend, RecordingBackend, ScriptedBackend};
pub use context::{prune_context, PruneWarning, Pruned};
pub use execute::{execute, Backoff, ExecPolicy, StepError, StepOutcome, StepRecord};
pub use messages::{validate_history, ChatMessage, ChatResponse, LlmParams, Role, ToolResult, Usage};
pub use parse::{parse_tool_call, Directive, ParseError};
pub use plan::{validate_plan, PlanError, PlanStep, WorkflowPlan, MAX_PLAN_STEPS};
pub use planner::{plan, PlanPolicy, Planned, PlanningError};
pub use remote::RemoteBackend;
pub use run::{run_agent, AgentError, AgentPolicy, AgentResponse};
pub use summarize::{compact_trace, lint, summarize, Summary};

/// Progress notifications from a running agent, in order of occurrence.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AgentEvent {
    Plan { plan: WorkflowPlan },
    StepStarted { step_id: u32, tool: String },
    StepFinished { record: StepRecord },
    /// A piece of the answer text.
    Token { text: String },
    Final { response: AgentResponse },
}

pub type EventSink = UnboundedSender<AgentEvent>;

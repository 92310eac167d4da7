//! Consistency lint, trace compaction and the summarization call.

use serde_json::{json, Map, Value};

use super::backend::{BackendError, LlmBackend};
use super::execute::{StepOutcome, StepRecord};
use super::messages::{ChatResponse, LlmParams};
use super::prompt::{chat_messages, summary_messages};
use super::{AgentEvent, EventSink};

pub const MAX_FORMATION_ENERGY: f64 = 5.0;
/// Strings longer than this are elided from the summarizer input.
pub const MAX_STRING_CHARS: usize = 240;
/// Numeric arrays longer than this are replaced by their length and range.
pub const MAX_ARRAY_ITEMS: usize = 16;

/// Physical-consistency warnings for a trace: negative bandgaps, formation
/// energies above the threshold, unconverged relaxations, and failed or
/// skipped steps.
pub fn lint(trace: &[StepRecord]) -> Vec<String> {
    let mut out = Vec::new();
    for r in trace {
        match &r.outcome {
            StepOutcome::Success { result } => lint_value(r, "", result, &mut out),
            StepOutcome::Failed { error } => {
                out.push(format!("step {} ({}) failed: {}", r.step_id, r.tool, error.message))
            }
            StepOutcome::SkippedFailed { failed_dependency } => out.push(format!(
                "step {} ({}) was skipped because step {failed_dependency} failed",
                r.step_id, r.tool
            )),
        }
    }
    out
}

fn lint_value(r: &StepRecord, path: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match (k.as_str(), x) {
                    (key, Value::Number(n)) if key.starts_with("bandgap") && n.as_f64().is_some_and(|g| g < 0.0) => {
                        out.push(format!("step {} ({}): negative bandgap {p} = {n} eV", r.step_id, r.tool));
                    }
                    ("formation_energy", Value::Number(n)) if n.as_f64().is_some_and(|e| e > MAX_FORMATION_ENERGY) => {
                        out.push(format!(
                            "step {} ({}): formation energy {p} = {n} eV/atom exceeds {MAX_FORMATION_ENERGY}",
                            r.step_id, r.tool
                        ));
                    }
                    ("converged", Value::Bool(false)) => {
                        out.push(format!("step {} ({}): relaxation did not converge", r.step_id, r.tool));
                    }
                    _ => lint_value(r, &p, x, out),
                }
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                lint_value(r, &format!("{path}.{i}"), x, out);
            }
        }
        _ => {}
    }
}

fn compact_value(v: &Value) -> Value {
    match v {
        Value::String(s) if s.chars().count() > MAX_STRING_CHARS => {
            json!(format!("<{} characters, {} lines elided>", s.chars().count(), s.lines().count()))
        }
        Value::Array(items) if items.len() > MAX_ARRAY_ITEMS && items.iter().all(Value::is_number) => {
            let xs: Vec<f64> = items.iter().filter_map(Value::as_f64).collect();
            let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            json!(format!("<{} numbers from {min} to {max}>", xs.len()))
        }
        Value::Array(items) if items.len() > MAX_ARRAY_ITEMS => {
            let mut kept: Vec<Value> = items[..MAX_ARRAY_ITEMS].iter().map(compact_value).collect();
            kept.push(json!(format!("<{} more items>", items.len() - MAX_ARRAY_ITEMS)));
            Value::Array(kept)
        }
        Value::Array(items) => Value::Array(items.iter().map(compact_value).collect()),
        Value::Object(map) => Value::Object(map.iter().map(|(k, x)| (k.clone(), compact_value(x))).collect::<Map<_, _>>()),
        _ => v.clone(),
    }
}

/// Trace reduced to what a summarizer needs: structures and long grids are
/// elided, scalars and peak lists survive intact.
pub fn compact_trace(trace: &[StepRecord]) -> Value {
    Value::Array(
        trace
            .iter()
            .map(|r| {
                let mut o = json!({"step_id": r.step_id, "tool": r.tool});
                match &r.outcome {
                    StepOutcome::Success { result } => {
                        o["status"] = json!("success");
                        o["result"] = compact_value(result);
                    }
                    StepOutcome::Failed { error } => {
                        o["status"] = json!("failed");
                        o["error"] = json!(error.message);
                    }
                    StepOutcome::SkippedFailed { failed_dependency } => {
                        o["status"] = json!("skipped_failed");
                        o["failed_dependency"] = json!(failed_dependency);
                    }
                }
                o
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    pub warnings: Vec<String>,
    pub response: ChatResponse,
}

/// Lints the trace, then asks the model for an answer. An empty trace is a
/// plain chat turn with the question alone.
pub async fn summarize(
    query: &str,
    trace: &[StepRecord],
    backend: &dyn LlmBackend,
    params: &LlmParams,
    events: Option<&EventSink>,
) -> Result<Summary, BackendError> {
    let warnings = lint(trace);
    let messages = if trace.is_empty() {
        chat_messages(query)
    } else {
        let compact = serde_json::to_string_pretty(&compact_trace(trace)).unwrap_or_default();
        summary_messages(query, &compact, &warnings)
    };
    let response = match events {
        Some(tx) => {
            let mut sink = |d: &str| {
                let _ = tx.send(AgentEvent::Token { text: d.to_string() });
            };
            backend.chat_stream(&messages, params, &mut sink).await?
        }
        None => backend.chat(&messages, params).await?,
    };
    Ok(Summary { text: response.text.clone(), warnings, response })
}

//! Budgeted pruning of conversation history.

use std::collections::HashSet;

use serde_json::Value;

use super::messages::{ChatMessage, Role};

pub const CHARS_PER_TOKEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PruneWarning {
    /// System prompt plus the last user message already exceed the budget.
    BudgetTooSmall { needed: usize, budget: usize },
}

impl std::fmt::Display for PruneWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PruneWarning::BudgetTooSmall { needed, budget } => write!(
                f,
                "context budget of {budget} tokens is below the {needed} needed for the system prompt and question"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    pub messages: Vec<ChatMessage>,
    pub warning: Option<PruneWarning>,
}

pub fn estimate_tokens(messages: &[ChatMessage]) -> usize {
    messages.iter().map(ChatMessage::estimated_tokens).sum()
}

fn stub_for(m: &ChatMessage) -> ChatMessage {
    let tool = m.tool_result.as_ref().map(|r| r.tool.clone()).unwrap_or_else(|| "tool".into());
    let mut out = m.clone();
    out.content = format!("[result of {tool} elided]");
    if let Some(r) = out.tool_result.as_mut() {
        r.result = Value::Null;
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Keep {
    Drop,
    Stub,
    Full,
}

/// Fits `history` into `budget` tokens. Priority: system messages, the last
/// user message, tool results whose call ids are in `pinned`, then everything
/// else newest first. A tool result that does not fit is replaced by a
/// one-line stub when the stub fits. Order is preserved, and tool results
/// whose assistant call was dropped are dropped with it.
pub fn prune_context(history: &[ChatMessage], budget: usize, pinned: &HashSet<String>) -> Pruned {
    if estimate_tokens(history) <= budget {
        return Pruned { messages: history.to_vec(), warning: None };
    }
    let last_user = history.iter().rposition(|m| m.role == Role::User);
    let mut keep = vec![Keep::Drop; history.len()];
    let mut used = 0;
    for (i, m) in history.iter().enumerate() {
        if m.role == Role::System || Some(i) == last_user {
            keep[i] = Keep::Full;
            used += m.estimated_tokens();
        }
    }
    if used > budget {
        let messages = history.iter().zip(&keep).filter(|(_, k)| **k == Keep::Full).map(|(m, _)| m.clone()).collect();
        return Pruned { messages, warning: Some(PruneWarning::BudgetTooSmall { needed: used, budget }) };
    }

    let is_pinned = |m: &ChatMessage| {
        let id = m.tool_result.as_ref().map(|r| &r.call_id).or(m.tool_call.as_ref().map(|c| &c.call_id));
        id.is_some_and(|id| pinned.contains(id))
    };
    let mut order: Vec<usize> = (0..history.len()).rev().filter(|&i| keep[i] == Keep::Drop).collect();
    order.sort_by_key(|&i| !is_pinned(&history[i]));
    for i in order {
        let m = &history[i];
        let full = m.estimated_tokens();
        if used + full <= budget {
            keep[i] = Keep::Full;
            used += full;
        } else if m.role == Role::Tool {
            let stub = stub_for(m).estimated_tokens();
            if used + stub <= budget {
                keep[i] = Keep::Stub;
                used += stub;
            }
        }
    }

    let mut calls = HashSet::new();
    let mut messages = Vec::new();
    for (m, k) in history.iter().zip(&keep) {
        if *k == Keep::Drop {
            continue;
        }
        if let Some(c) = &m.tool_call {
            calls.insert(c.call_id.clone());
        }
        if let Some(r) = &m.tool_result {
            if !calls.contains(&r.call_id) {
                continue;
            }
        }
        messages.push(if *k == Keep::Stub { stub_for(m) } else { m.clone() });
    }
    Pruned { messages, warning: None }
}

use std::collections::HashSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::toolkit::ToolCall;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub call_id: String,
    pub tool: String,
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call: Option<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_result: Option<ToolResult>,
}

impl ChatMessage {
    fn plain(role: Role, content: impl Into<String>) -> Self {
        Self { role, content: content.into(), tool_call: None, tool_result: None }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, content)
    }

    pub fn assistant_call(content: impl Into<String>, call: ToolCall) -> Self {
        Self { tool_call: Some(call), ..Self::plain(Role::Assistant, content) }
    }

    /// Tool-role message answering `call`; the content is the compact result JSON.
    pub fn tool(call: &ToolCall, result: Value) -> Self {
        Self {
            role: Role::Tool,
            content: result.to_string(),
            tool_call: None,
            tool_result: Some(ToolResult { call_id: call.call_id.clone(), tool: call.tool.clone(), result }),
        }
    }

    /// Rough size in tokens at 4 characters per token.
    pub fn estimated_tokens(&self) -> usize {
        let mut chars = self.content.chars().count();
        if let Some(c) = &self.tool_call {
            chars += c.tool.len() + c.arguments.to_string().len();
        }
        chars.div_ceil(4)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistoryError {
    #[error("message {index}: tool message has no call_id")]
    MissingCallId { index: usize },
    #[error("message {index}: call_id {call_id} does not answer an earlier assistant tool call")]
    UnmatchedCallId { index: usize, call_id: String },
}

/// Every tool-role message must answer a tool call made earlier by the assistant.
pub fn validate_history(messages: &[ChatMessage]) -> Result<(), HistoryError> {
    let mut calls = HashSet::new();
    for (index, m) in messages.iter().enumerate() {
        if let Some(c) = &m.tool_call {
            calls.insert(c.call_id.as_str());
        }
        if m.role == Role::Tool {
            let Some(r) = &m.tool_result else {
                return Err(HistoryError::MissingCallId { index });
            };
            if !calls.contains(r.call_id.as_str()) {
                return Err(HistoryError::UnmatchedCallId { index, call_id: r.call_id.clone() });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmParams {
    /// Pinned model identifier.
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for LlmParams {
    fn default() -> Self {
        Self { model: "gpt-oss-20b".into(), temperature: 0.0, max_tokens: 2048, seed: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
    pub latency: Duration,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn history_call_ids_must_match() {
        let call = ToolCall::new("get_structure", json!({"jid": "JVASP-30"}));
        let good = vec![
            ChatMessage::user("q"),
            ChatMessage::assistant_call("", call.clone()),
            ChatMessage::tool(&call, json!({"poscar": "x"})),
        ];
        assert!(validate_history(&good).is_ok());
        let orphan = vec![ChatMessage::user("q"), ChatMessage::tool(&call, json!({}))];
        assert!(matches!(validate_history(&orphan), Err(HistoryError::UnmatchedCallId { index: 1, .. })));
    }

    #[test]
    fn serialization_omits_empty_tool_fields() {
        let v = serde_json::to_value(ChatMessage::user("hi")).unwrap();
        assert_eq!(v, json!({"role": "user", "content": "hi"}));
    }
}

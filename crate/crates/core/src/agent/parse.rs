//! Turns model output into a tool call, a plan or a final answer.

use serde_json::{Map, Value};
use thiserror::Error;

use super::plan::{validate_plan, PlanError, WorkflowPlan};
use crate::toolkit::{Registry, ToolCall, ToolError, Violation};

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    Tool(ToolCall),
    Plan(WorkflowPlan),
    Final(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("response contains no JSON object")]
    NotJson,
    #[error("JSON object is not a tool call, plan or final answer: {0}")]
    InvalidShape(String),
    #[error("unknown tool '{name}'")]
    UnknownTool { name: String, suggestions: Vec<String> },
    #[error("tool '{tool}' is not enabled")]
    NotEnabled { tool: String },
    #[error("invalid arguments for '{tool}'")]
    SchemaViolation { tool: String, violations: Vec<Violation> },
    #[error("invalid plan: {0}")]
    InvalidPlan(PlanError),
}

impl ParseError {
    /// Corrective instruction sent back to the model before a retry.
    pub fn retry_message(&self) -> String {
        let body = match self {
            ParseError::NotJson => "Your reply did not contain a JSON object.".to_string(),
            ParseError::InvalidShape(why) => format!("Your JSON object has the wrong shape: {why}."),
            ParseError::UnknownTool { name, suggestions } if suggestions.is_empty() => {
                format!("There is no tool named '{name}'. Use only tools from the catalogue.")
            }
            ParseError::UnknownTool { name, suggestions } => {
                format!("There is no tool named '{name}'. Did you mean: {}?", suggestions.join(", "))
            }
            ParseError::NotEnabled { tool } => format!("The tool '{tool}' is not enabled. Choose another tool."),
            ParseError::SchemaViolation { tool, violations } => {
                let list: Vec<String> = violations.iter().map(|v| format!("- {v}")).collect();
                format!("The arguments for '{tool}' are invalid:\n{}", list.join("\n"))
            }
            ParseError::InvalidPlan(e) => format!("The plan is invalid: {e}."),
        };
        format!(
            "{body}\nRespond with a single JSON object: {{\"tool\": ..., \"arguments\": {{...}}}}, \
             {{\"steps\": [...]}} or {{\"final_answer\": \"...\"}}. No other text."
        )
    }
}

impl From<PlanError> for ParseError {
    fn from(e: PlanError) -> Self {
        ParseError::InvalidPlan(e)
    }
}

/// First parseable JSON object in `text`, whether fenced or inline.
pub fn extract_json_object(text: &str) -> Option<Map<String, Value>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

pub fn parse_tool_call(text: &str, registry: &Registry) -> Result<Directive, ParseError> {
    let obj = extract_json_object(text).ok_or(ParseError::NotJson)?;
    if let Some(answer) = obj.get("final_answer") {
        return match answer {
            Value::String(s) => Ok(Directive::Final(s.clone())),
            _ => Err(ParseError::InvalidShape("final_answer must be a string".into())),
        };
    }
    if obj.contains_key("steps") {
        let plan: WorkflowPlan =
            serde_json::from_value(Value::Object(obj)).map_err(|e| ParseError::InvalidShape(e.to_string()))?;
        validate_plan(&plan, registry)?;
        return Ok(Directive::Plan(plan));
    }
    if let Some(tool) = obj.get("tool") {
        let Some(name) = tool.as_str() else {
            return Err(ParseError::InvalidShape("tool must be a string".into()));
        };
        let arguments = obj.get("arguments").cloned().unwrap_or_else(|| Value::Object(Map::new()));
        registry.check_arguments(name, &arguments, false).map_err(|e| match e {
            ToolError::UnknownTool { name, suggestions } => ParseError::UnknownTool { name, suggestions },
            ToolError::NotEnabled { tool } => ParseError::NotEnabled { tool },
            ToolError::SchemaViolation { tool, violations } => ParseError::SchemaViolation { tool, violations },
            other => ParseError::InvalidShape(other.to_string()),
        })?;
        return Ok(Directive::Tool(ToolCall::new(name, arguments)));
    }
    Err(ParseError::InvalidShape("expected a 'tool', 'steps' or 'final_answer' key".into()))
}

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::schema::{ObjectSchema, Violation};
use crate::canonical::canonical_json;

/// Broad failure class; decides the HTTP status and whether a retry may help.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    InvalidInput,
    NotFound,
    Unphysical,
    NotEnabled,
    Transient,
    Internal,
}

/// Error returned by a tool handler.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{code}: {message}")]
pub struct ToolFailure {
    pub kind: FailureKind,
    /// Stable machine-readable code, e.g. `empty_filter`.
    pub code: String,
    pub message: String,
    pub hint: Option<String>,
}

impl ToolFailure {
    pub fn new(kind: FailureKind, code: &str, message: impl Into<String>) -> Self {
        Self { kind, code: code.to_string(), message: message.into(), hint: None }
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = Some(hint.into());
        self
    }

    pub fn invalid(code: &str, message: impl Into<String>) -> Self {
        Self::new(FailureKind::InvalidInput, code, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(FailureKind::NotFound, "not_found", message)
    }

    pub fn unphysical(code: &str, message: impl Into<String>) -> Self {
        Self::new(FailureKind::Unphysical, code, message)
    }

    pub fn transient(message: impl Into<String>) -> Self {
        Self::new(FailureKind::Transient, "transient", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(FailureKind::Internal, "internal", message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToolError {
    #[error("unknown tool '{name}'")]
    UnknownTool { name: String, suggestions: Vec<String> },
    #[error("tool '{tool}' is not enabled")]
    NotEnabled { tool: String },
    #[error("invalid arguments for '{tool}': {}", join(violations))]
    SchemaViolation { tool: String, violations: Vec<Violation> },
    #[error("'{tool}' failed: {failure}")]
    Failed { tool: String, failure: ToolFailure },
    #[error("'{tool}' returned a result that violates its schema: {}", join(violations))]
    BadResult { tool: String, violations: Vec<Violation> },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl ToolError {
    pub fn kind(&self) -> FailureKind {
        match self {
            ToolError::UnknownTool { .. } => FailureKind::NotFound,
            ToolError::NotEnabled { .. } => FailureKind::NotEnabled,
            ToolError::SchemaViolation { .. } => FailureKind::InvalidInput,
            ToolError::Failed { failure, .. } => failure.kind,
            ToolError::BadResult { .. } => FailureKind::Internal,
        }
    }

    pub fn code(&self) -> &str {
        match self {
            ToolError::UnknownTool { .. } => "unknown_tool",
            ToolError::NotEnabled { .. } => "not_enabled",
            ToolError::SchemaViolation { .. } => "schema_violation",
            ToolError::Failed { failure, .. } => &failure.code,
            ToolError::BadResult { .. } => "bad_result",
        }
    }

    pub fn hint(&self) -> Option<String> {
        match self {
            ToolError::UnknownTool { suggestions, .. } if !suggestions.is_empty() => {
                Some(format!("did you mean {}?", suggestions.join(" or ")))
            }
            ToolError::UnknownTool { .. } => None,
            ToolError::NotEnabled { .. } => Some("this tool needs an external service that is not configured".into()),
            ToolError::SchemaViolation { violations, .. } => Some(join(violations)),
            ToolError::Failed { failure, .. } => failure.hint.clone(),
            ToolError::BadResult { .. } => None,
        }
    }

    pub fn is_transient(&self) -> bool {
        self.kind() == FailureKind::Transient
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("tool '{0}' is already registered")]
    Duplicate(String),
    #[error("invalid tool name '{0}' (lowercase letters, digits and '_' only)")]
    InvalidName(String),
}

/// Metadata that describes a tool to planners and API clients.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    pub params: ObjectSchema,
    pub result: ObjectSchema,
    pub enabled: bool,
    /// Example arguments shown in planner prompts.
    pub example: Option<Value>,
}

pub type ToolHandler = Arc<dyn Fn(&Value) -> Result<Value, ToolFailure> + Send + Sync>;

/// One tool invocation. `call_id` is derived from the tool name and the
/// canonical argument JSON, so equal calls share an id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    pub arguments: Value,
    pub call_id: String,
}

impl ToolCall {
    pub fn new(tool: impl Into<String>, arguments: Value) -> Self {
        let tool = tool.into();
        let mut h = Sha256::new();
        h.update(tool.as_bytes());
        h.update([0u8]);
        h.update(canonical_json(&arguments).as_bytes());
        let call_id = format!("call_{}", &hex::encode(h.finalize())[..16]);
        Self { tool, arguments, call_id }
    }
}

#[derive(Clone)]
struct Entry {
    descriptor: ToolDescriptor,
    handler: ToolHandler,
}

/// Name-indexed tool collection. Registration order is preserved for listing.
#[derive(Clone, Default)]
pub struct Registry {
    entries: Vec<Entry>,
    index: HashMap<String, usize>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.entries.iter().map(|e| &e.descriptor.name)).finish()
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.starts_with(|c: char| c.is_ascii_lowercase())
        && name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, descriptor: ToolDescriptor, handler: F) -> Result<(), RegistryError>
    where
        F: Fn(&Value) -> Result<Value, ToolFailure> + Send + Sync + 'static,
    {
        let name = descriptor.name.clone();
        if !valid_name(&name) {
            return Err(RegistryError::InvalidName(name));
        }
        if self.index.contains_key(&name) {
            return Err(RegistryError::Duplicate(name));
        }
        self.index.insert(name, self.entries.len());
        self.entries.push(Entry { descriptor, handler: Arc::new(handler) });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &ToolDescriptor> {
        self.entries.iter().map(|e| &e.descriptor)
    }

    pub fn get(&self, name: &str) -> Option<&ToolDescriptor> {
        self.index.get(name).map(|&i| &self.entries[i].descriptor)
    }

    /// Up to three registered names within edit distance 3 of `name`, nearest first.
    pub fn suggest(&self, name: &str) -> Vec<String> {
        let mut scored: Vec<(usize, &str)> = self
            .entries
            .iter()
            .map(|e| (strsim::levenshtein(name, &e.descriptor.name), e.descriptor.name.as_str()))
            .filter(|(d, _)| *d <= 3)
            .collect();
        scored.sort();
        scored.into_iter().take(3).map(|(_, n)| n.to_string()).collect()
    }

    fn lookup(&self, name: &str) -> Result<&Entry, ToolError> {
        match self.index.get(name) {
            Some(&i) => Ok(&self.entries[i]),
            None => Err(ToolError::UnknownTool { name: name.to_string(), suggestions: self.suggest(name) }),
        }
    }

    /// Checks existence, enablement and the parameter schema without running
    /// the handler. With `template` set, `$stepN` placeholders pass.
    pub fn check_arguments(&self, name: &str, args: &Value, template: bool) -> Result<(), ToolError> {
        let entry = self.lookup(name)?;
        if !entry.descriptor.enabled {
            return Err(ToolError::NotEnabled { tool: name.to_string() });
        }
        let checked = if template {
            entry.descriptor.params.validate_template(args)
        } else {
            entry.descriptor.params.validate(args)
        };
        checked.map_err(|violations| ToolError::SchemaViolation { tool: name.to_string(), violations })
    }

    /// Validates arguments, runs the handler and validates its result.
    pub fn invoke(&self, name: &str, args: &Value) -> Result<Value, ToolError> {
        self.check_arguments(name, args, false)?;
        let entry = self.lookup(name)?;
        let out = (entry.handler)(args).map_err(|failure| ToolError::Failed { tool: name.to_string(), failure })?;
        entry
            .descriptor
            .result
            .validate(&out)
            .map_err(|violations| ToolError::BadResult { tool: name.to_string(), violations })?;
        Ok(out)
    }

    pub fn invoke_call(&self, call: &ToolCall) -> Result<Value, ToolError> {
        self.invoke(&call.tool, &call.arguments)
    }

    /// Plain-text tool catalogue for planner prompts: one block per tool in
    /// registration order with its parameters and an example call. Disabled
    /// tools are listed but marked as unavailable.
    pub fn prompt_block(&self) -> String {
        let mut out = String::new();
        for d in self.descriptors() {
            if !d.enabled {
                let _ = writeln!(out, "- {} [not enabled, do not call]: {}", d.name, d.description);
                continue;
            }
            let _ = writeln!(out, "- {}: {}", d.name, d.description);
            for (pname, p) in d.params.properties() {
                let req = if d.params.required_names().contains(pname) { ", required" } else { "" };
                let _ = writeln!(out, "    {pname} ({}{req}): {}", p.type_label(), p.description);
            }
            if let Some(ex) = &d.example {
                let _ = writeln!(out, "    example: {{\"tool\": \"{}\", \"arguments\": {ex}}}", d.name);
            }
        }
        out
    }
}

//! Prompt text for the planner, summarizer and plain chat. Fixture hashes
//! depend on every byte here, so edits require re-recording fixtures.

use super::messages::ChatMessage;
use crate::toolkit::Registry;

const PLANNER_PREAMBLE: &str = "You are a materials-science research assistant that answers questions by \
calling tools. Think about which tools the question needs, then reply with exactly one JSON object and no \
other text.

Reply formats:
1. A single tool call: {\"tool\": \"<name>\", \"arguments\": {...}}
2. A workflow plan: {\"steps\": [{\"step_id\": 1, \"tool\": \"<name>\", \"arguments\": {...}, \
\"depends_on\": [], \"rationale\": \"<why>\"}, ...]}
3. A direct answer when no tool is needed: {\"final_answer\": \"<text>\"}

Rules:
- Use only tools from the catalogue below and only arguments they declare.
- To pass an earlier output into a later step, use the string \"$step<id>.<field>\" as the whole \
argument value, e.g. \"$step2.poscar\" or \"$step1.records.0.jid\", and list that step in depends_on.
- Plans have at most 12 steps.";

/// Two fixed exemplars: one single-tool call and one three-step plan.
const FEW_SHOT: &str = "Example 1
Question: Give me the structure of silicon JVASP-1002.
Reply: {\"tool\": \"get_structure\", \"arguments\": {\"jid\": \"JVASP-1002\"}}

Example 2
Question: Find wurtzite GaN and predict its properties.
Reply: {\"steps\": [\
{\"step_id\": 1, \"tool\": \"jarvis_dft_query\", \"arguments\": {\"formula\": \"GaN\", \"spacegroup\": \"P6_3mc\"}, \
\"depends_on\": [], \"rationale\": \"find the record\"}, \
{\"step_id\": 2, \"tool\": \"get_structure\", \"arguments\": {\"jid\": \"$step1.records.0.jid\"}, \
\"depends_on\": [1], \"rationale\": \"fetch its structure\"}, \
{\"step_id\": 3, \"tool\": \"predict_properties\", \"arguments\": {\"poscar\": \"$step2.poscar\"}, \
\"depends_on\": [2], \"rationale\": \"estimate properties\"}]}";

pub const SUMMARY_PROMPT: &str = "You are a materials-science research assistant. You are given a question, \
the results of the tool workflow that was run for it, and any consistency warnings. Write a concise answer \
for a researcher. Quote numbers exactly as they appear in the results and state units. Mention failed \
steps and warnings. Do not invent values that are not in the results.";

pub const CHAT_PROMPT: &str = "You are a helpful materials-science research assistant. Answer the question \
directly and concisely.";

pub fn planner_system_prompt(registry: &Registry) -> String {
    format!("{PLANNER_PREAMBLE}\n\nTool catalogue:\n{}\n{FEW_SHOT}", registry.prompt_block())
}

/// Opening conversation for the planning phase.
pub fn planner_messages(query: &str, registry: &Registry) -> Vec<ChatMessage> {
    vec![ChatMessage::system(planner_system_prompt(registry)), ChatMessage::user(query)]
}

pub fn summary_user_message(query: &str, compact_trace: &str, warnings: &[String]) -> String {
    let warn = if warnings.is_empty() {
        "none".to_string()
    } else {
        warnings.iter().map(|w| format!("- {w}")).collect::<Vec<_>>().join("\n")
    };
    format!("Question: {query}\n\nWorkflow results:\n{compact_trace}\n\nWarnings:\n{warn}")
}

pub fn summary_messages(query: &str, compact_trace: &str, warnings: &[String]) -> Vec<ChatMessage> {
    vec![ChatMessage::system(SUMMARY_PROMPT), ChatMessage::user(summary_user_message(query, compact_trace, warnings))]
}

pub fn chat_messages(query: &str) -> Vec<ChatMessage> {
    vec![ChatMessage::system(CHAT_PROMPT), ChatMessage::user(query)]
}

//! Workflow plans: validation, ordering and placeholder resolution.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::toolkit::{is_placeholder, Registry, ToolError, Violation};

/// Hard cap on plan length. Longer workflows are out of reach for the
/// planner prompt and are rejected rather than truncated.
pub const MAX_PLAN_STEPS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub step_id: u32,
    pub tool: String,
    /// Arguments with optional `$step<id>.<path>` placeholders as whole string values.
    #[serde(alias = "arguments")]
    pub argument_template: Value,
    #[serde(default)]
    pub depends_on: Vec<u32>,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WorkflowPlan {
    pub steps: Vec<PlanStep>,
}

impl WorkflowPlan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step(&self, id: u32) -> Option<&PlanStep> {
        self.steps.iter().find(|s| s.step_id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("plan has {count} steps, the limit is {max}")]
    TooManySteps { count: usize, max: usize },
    #[error("step id {0} is used more than once")]
    DuplicateStepId(u32),
    #[error("step {step}: unknown tool '{name}'")]
    UnknownTool { step: u32, name: String, suggestions: Vec<String> },
    #[error("step {step}: tool '{tool}' is not enabled")]
    NotEnabled { step: u32, tool: String },
    #[error("step {step}: arguments for '{tool}' do not match its schema: {}", join(violations))]
    SchemaViolation { step: u32, tool: String, violations: Vec<Violation> },
    #[error("step {step} depends on step {dep}, which does not exist")]
    UnknownDependency { step: u32, dep: u32 },
    #[error("step {step} references $step{referenced} but does not list it in depends_on")]
    UndeclaredReference { step: u32, referenced: u32 },
    #[error("dependency cycle among steps {steps:?}")]
    CycleDetected { steps: Vec<u32> },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Step ids referenced by placeholders anywhere in `template`.
pub fn referenced_steps(template: &Value) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    collect_refs(template, &mut out);
    out
}

fn collect_refs(v: &Value, out: &mut BTreeSet<u32>) {
    match v {
        Value::String(s) => {
            if let Some((id, _)) = split_placeholder(s) {
                out.insert(id);
            }
        }
        Value::Array(items) => items.iter().for_each(|x| collect_refs(x, out)),
        Value::Object(map) => map.values().for_each(|x| collect_refs(x, out)),
        _ => {}
    }
}

/// `$step3.records.0.jid` -> (3, ["records", "0", "jid"]).
fn split_placeholder(s: &str) -> Option<(u32, Vec<&str>)> {
    if !is_placeholder(s) {
        return None;
    }
    let mut parts = s["$step".len()..].split('.');
    let id = parts.next()?.parse().ok()?;
    Some((id, parts.collect()))
}

/// Checks every plan invariant and returns the execution order: a
/// topological sort that always takes the smallest ready step id.
pub fn validate_plan(plan: &WorkflowPlan, registry: &Registry) -> Result<Vec<u32>, PlanError> {
    if plan.steps.len() > MAX_PLAN_STEPS {
        return Err(PlanError::TooManySteps { count: plan.steps.len(), max: MAX_PLAN_STEPS });
    }
    let mut ids = BTreeSet::new();
    for s in &plan.steps {
        if !ids.insert(s.step_id) {
            return Err(PlanError::DuplicateStepId(s.step_id));
        }
    }
    for s in &plan.steps {
        match registry.check_arguments(&s.tool, &s.argument_template, true) {
            Ok(()) => {}
            Err(ToolError::UnknownTool { name, suggestions }) => {
                return Err(PlanError::UnknownTool { step: s.step_id, name, suggestions })
            }
            Err(ToolError::NotEnabled { tool }) => return Err(PlanError::NotEnabled { step: s.step_id, tool }),
            Err(ToolError::SchemaViolation { tool, violations }) => {
                return Err(PlanError::SchemaViolation { step: s.step_id, tool, violations })
            }
            Err(other) => {
                let violations = vec![Violation::new("", other.to_string())];
                return Err(PlanError::SchemaViolation { step: s.step_id, tool: s.tool.clone(), violations });
            }
        }
        for &dep in &s.depends_on {
            if !ids.contains(&dep) {
                return Err(PlanError::UnknownDependency { step: s.step_id, dep });
            }
        }
        for referenced in referenced_steps(&s.argument_template) {
            if !s.depends_on.contains(&referenced) {
                return Err(PlanError::UndeclaredReference { step: s.step_id, referenced });
            }
        }
    }
    topo_order(plan)
}

/// Kahn's algorithm over the depends_on edges.
pub fn topo_order(plan: &WorkflowPlan) -> Result<Vec<u32>, PlanError> {
    let mut indegree: BTreeMap<u32, usize> = BTreeMap::new();
    let mut dependents: HashMap<u32, Vec<u32>> = HashMap::new();
    for s in &plan.steps {
        let deps: BTreeSet<u32> = s.depends_on.iter().copied().collect();
        indegree.insert(s.step_id, deps.len());
        for d in deps {
            dependents.entry(d).or_default().push(s.step_id);
        }
    }
    let mut ready: BTreeSet<u32> = indegree.iter().filter(|(_, &n)| n == 0).map(|(&id, _)| id).collect();
    let mut order = Vec::with_capacity(plan.steps.len());
    while let Some(id) = ready.pop_first() {
        order.push(id);
        for &next in dependents.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
            if let Some(n) = indegree.get_mut(&next) {
                *n -= 1;
                if *n == 0 {
                    ready.insert(next);
                }
            }
        }
    }
    if order.len() < indegree.len() {
        let done: BTreeSet<u32> = order.iter().copied().collect();
        let steps = indegree.keys().filter(|id| !done.contains(id)).copied().collect();
        return Err(PlanError::CycleDetected { steps });
    }
    Ok(order)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot resolve {placeholder}: {reason}")]
pub struct ResolveError {
    pub placeholder: String,
    pub reason: String,
}

/// Replaces every placeholder with the value it points at in `results`.
/// Path segments are object keys or array indices.
pub fn resolve_template(template: &Value, results: &HashMap<u32, Value>) -> Result<Value, ResolveError> {
    match template {
        Value::String(s) => match split_placeholder(s) {
            Some((id, path)) => lookup(s, id, &path, results).cloned(),
            None => Ok(template.clone()),
        },
        Value::Array(items) => items.iter().map(|x| resolve_template(x, results)).collect::<Result<_, _>>().map(Value::Array),
        Value::Object(map) => {
            let mut out = serde_json::Map::new();
            for (k, v) in map {
                out.insert(k.clone(), resolve_template(v, results)?);
            }
            Ok(Value::Object(out))
        }
        _ => Ok(template.clone()),
    }
}

fn lookup<'a>(placeholder: &str, id: u32, path: &[&str], results: &'a HashMap<u32, Value>) -> Result<&'a Value, ResolveError> {
    let err = |reason: String| ResolveError { placeholder: placeholder.to_string(), reason };
    let mut cur = results.get(&id).ok_or_else(|| err(format!("step {id} has no result")))?;
    for (depth, seg) in path.iter().enumerate() {
        let next = match cur {
            Value::Object(map) => map.get(*seg),
            Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
            _ => None,
        };
        cur = next.ok_or_else(|| err(format!("no field '{}' in step {id} output", path[..=depth].join("."))))?;
    }
    Ok(cur)
}

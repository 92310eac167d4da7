use std::path::PathBuf;
use std::sync::Arc;

use atomflow_core::agent::{AgentPolicy, ScriptedBackend};
use atomflow_core::clock::FixedClock;
use serde_json::Value;

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn scripted() -> ScriptedBackend {
    ScriptedBackend::from_file(fixtures_dir().join("agent_fixtures.json")).unwrap()
}

pub fn query(name: &str) -> String {
    let cases: Vec<Value> = serde_json::from_str(&std::fs::read_to_string(fixtures_dir().join("cases.json")).unwrap()).unwrap();
    cases.iter().find(|c| c["name"] == name).unwrap()["query"].as_str().unwrap().to_string()
}

/// Default policy with a frozen clock so traces serialize identically.
pub fn fixed_policy() -> AgentPolicy {
    let mut p = AgentPolicy::default();
    p.exec.clock = Arc::new(FixedClock(1_700_000_000_000));
    p
}

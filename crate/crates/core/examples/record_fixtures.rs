//! Regenerates `fixtures/agent_fixtures.json`.
//!
//! Runs every case in `fixtures/cases.json` through the agent with an
//! authored backend and records each exchange under its message hash. Run
//! it after any change to prompt text or tool output:
//!
//!     cargo run -p atomflow-core --example record_fixtures

use std::path::PathBuf;
use std::sync::Arc;

use atomflow_core::agent::prompt::{CHAT_PROMPT, SUMMARY_PROMPT};
use atomflow_core::agent::{run_agent, AgentPolicy, BackendError, ChatMessage, FnBackend, LlmParams, RecordingBackend};
use atomflow_core::clock::FixedClock;
use atomflow_core::toolkit::default_registry;
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Deserialize)]
struct Case {
    name: String,
    query: String,
}

fn step(id: u32, tool: &str, args: Value, deps: &[u32], why: &str) -> Value {
    json!({"step_id": id, "tool": tool, "arguments": args, "depends_on": deps, "rationale": why})
}

fn planner_reply(case: &str, retry: bool) -> String {
    let v = match case {
        "defect_pipeline" => json!({"steps": [
            step(1, "jarvis_dft_query", json!({"formula": "GaN", "spacegroup": "P6_3mc"}), &[], "database search"),
            step(2, "get_structure", json!({"jid": "$step1.records.0.jid"}), &[1], "structure retrieval"),
            step(3, "make_supercell", json!({"poscar": "$step2.poscar", "scaling": [2, 2, 1]}), &[2], "supercell construction"),
            step(4, "substitute_site", json!({"poscar": "$step3.poscar", "site_index": 0, "element": "Al"}), &[3], "atomic substitution"),
            step(5, "relax_structure", json!({"poscar": "$step4.poscar", "max_steps": 1000}), &[4], "structure optimization"),
            step(6, "simulate_pxrd", json!({"poscar": "$step5.final"}), &[5], "XRD pattern simulation"),
            step(7, "predict_properties", json!({"poscar": "$step5.final"}), &[5], "property predictions"),
            step(8, "bandstructure_stub", json!({"poscar": "$step5.final"}), &[5], "band structure calculation"),
            step(9, "compile_report", json!({"style": "table", "inputs": {
                "doped": "$step4", "relaxation": "$step5", "properties": "$step7", "bands": "$step8"}}),
                &[4, 5, 7, 8], "result synthesis"),
            step(10, "compile_report", json!({"style": "summary", "title": "Al-doped GaN",
                "inputs": {"rows": "$step9.rows"}}), &[9], "summary generation"),
        ]}),
        "interface" => json!({"steps": [
            step(1, "jarvis_dft_query", json!({"formula": "GaN", "sort_by": "formation_energy", "limit": 5}), &[], "search GaN polymorphs"),
            step(2, "jarvis_dft_query", json!({"formula": "AlN", "sort_by": "formation_energy", "limit": 5}), &[], "search AlN polymorphs"),
            step(3, "generate_interface", json!({"jid_a": "$step1.records.0.jid", "jid_b": "$step2.records.0.jid"}),
                &[1, 2], "lattice-matched interface from the lowest formation energy polymorphs"),
            step(4, "compile_report", json!({"style": "structure", "inputs": {"poscar": "$step3.interface"}}),
                &[3], "complete atomic coordinates"),
        ]}),
        "pxrd" => json!({"steps": [
            step(1, "jarvis_dft_query", json!({"formula": "Si", "sort_by": "formation_energy"}), &[], "identify the stable structure"),
            step(2, "get_structure", json!({"jid": "$step1.records.0.jid"}), &[1], "retrieve atomic coordinates"),
            step(3, "simulate_pxrd", json!({"poscar": "$step2.poscar", "wavelength": 1.5406}), &[2], "simulate the pattern"),
        ]}),
        "single_tool" => json!({"tool": "get_structure", "arguments": {"jid": "JVASP-1002"}}),
        "typo_retry" if !retry => json!({"tool": "get_structre", "arguments": {"jid": "JVASP-30"}}),
        "typo_retry" => json!({"tool": "get_structure", "arguments": {"jid": "JVASP-30"}}),
        "pure_chat" => json!({"final_answer": "The capital of the United States is Washington, D.C."}),
        other => panic!("no plan authored for case {other}"),
    };
    if case == "typo_retry" && !retry {
        // leading prose exercises extraction
        return format!("I will fetch it.\n```json\n{v}\n```");
    }
    v.to_string()
}

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x}"),
        None => v.to_string(),
    }
}

fn step_line(s: &Value) -> String {
    let id = &s["step_id"];
    let tool = s["tool"].as_str().unwrap_or("");
    if s["status"] != "success" {
        return format!("Step {id} ({tool}) did not complete: {}.", s["status"].as_str().unwrap_or(""));
    }
    let r = &s["result"];
    let detail = match tool {
        "jarvis_dft_query" => {
            let first = &r["records"][0];
            format!(
                "found {} records; first is {} ({}, {}) with formation energy {} eV/atom",
                r["count"], first["jid"].as_str().unwrap_or("-"), first["formula"].as_str().unwrap_or("-"),
                first["spacegroup"].as_str().unwrap_or("-"), num(&first["formation_energy"])
            )
        }
        "get_structure" => format!("retrieved {} ({})", r["formula"].as_str().unwrap_or(""), r["jid"].as_str().unwrap_or("")),
        "make_supercell" | "substitute_site" | "create_vacancy" => {
            format!("{} with {} sites", r["formula"].as_str().unwrap_or(""), r["num_sites"])
        }
        "relax_structure" => format!(
            "energy {} to {} after {} steps, converged: {}",
            num(&r["initial_energy"]), num(&r["final_energy"]), r["steps"], r["converged"]
        ),
        "simulate_pxrd" => {
            let peaks: Vec<String> = r["peaks"]
                .as_array()
                .map(|p| p.iter().take(3).map(|x| format!("{:.2}°", x["two_theta"].as_f64().unwrap_or(0.0))).collect())
                .unwrap_or_default();
            format!("first peaks at 2θ = {}", peaks.join(", "))
        }
        "predict_properties" => format!(
            "formation energy {} eV/atom, bandgap {} eV (OptB88vdW) and {} eV (TBmBJ), bulk modulus {} GPa",
            num(&r["formation_energy"]), num(&r["bandgap_opt"]), num(&r["bandgap_mbj"]), num(&r["bulk_modulus"])
        ),
        "bandstructure_stub" => format!("two-band model with a {} eV gap", num(&r["bandgap"])),
        "generate_interface" => format!(
            "{} with {} sites at mean strain {}",
            r["formula"].as_str().unwrap_or(""), r["num_sites"], num(&r["strain"])
        ),
        "compile_report" => {
            let n = r["structure"]["num_sites"].as_u64().or(r["rows"].as_array().map(|a| a.len() as u64));
            format!("{} report{}", r["style"].as_str().unwrap_or(""), n.map(|n| format!(" covering {n} entries")).unwrap_or_default())
        }
        _ => "done".to_string(),
    };
    format!("Step {id} ({tool}): {detail}.")
}

fn summary_reply(user: &str) -> String {
    let results = user
        .split_once("Workflow results:\n")
        .and_then(|(_, rest)| rest.split_once("\n\nWarnings:\n"))
        .expect("summary prompt layout");
    let trace: Value = serde_json::from_str(results.0).expect("compact trace is JSON");
    let mut lines = vec!["Summary of the workflow:".to_string()];
    lines.extend(trace.as_array().into_iter().flatten().map(step_line));
    if results.1 != "none" {
        lines.push(format!("Warnings:\n{}", results.1));
    }
    lines.join("\n")
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let cases: Vec<Case> = serde_json::from_str(&std::fs::read_to_string(root.join("cases.json")).unwrap()).unwrap();
    let by_query: Vec<(String, String)> = cases.iter().map(|c| (c.query.clone(), c.name.clone())).collect();

    let author = FnBackend(move |messages: &[ChatMessage]| -> Result<String, BackendError> {
        let system = &messages[0].content;
        let user = &messages[1].content;
        if system == SUMMARY_PROMPT {
            return Ok(summary_reply(user));
        }
        if system == CHAT_PROMPT {
            return Ok("The capital of the United States is Washington, D.C.".into());
        }
        let name = by_query.iter().find(|(q, _)| q == user).map(|(_, n)| n.as_str()).expect("known case");
        Ok(planner_reply(name, messages.len() > 2))
    });
    let recorder = RecordingBackend::new(author);
    let registry = Arc::new(default_registry());
    let params = LlmParams::default();
    let mut policy = AgentPolicy::default();
    policy.exec.clock = Arc::new(FixedClock(0));

    let rt = tokio::runtime::Runtime::new().unwrap();
    for case in &cases {
        let r = rt.block_on(run_agent(&case.query, Arc::clone(&registry), &recorder, &params, &policy, None)).unwrap();
        println!("{}: {} steps, answer {} chars", case.name, r.trace.len(), r.answer.len());
    }
    let out = serde_json::to_string_pretty(&recorder.fixtures()).unwrap();
    std::fs::write(root.join("agent_fixtures.json"), out + "\n").unwrap();
    println!("wrote {} fixtures", recorder.fixtures().len());
}

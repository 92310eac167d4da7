mod common;

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use atomflow_core::agent::prompt::chat_messages;
use atomflow_core::agent::{
    execute, plan, run_agent, summarize, validate_plan, Backoff, BackendError, ChatMessage, ExecPolicy, FnBackend,
    LlmParams, ParseError, PlanError, PlanPolicy, PlanStep, PlanningError, ScriptedBackend, StepOutcome, StepRecord,
    WorkflowPlan,
};
use atomflow_core::toolkit::{
    default_registry, FailureKind, ObjectSchema, PropertySchema as P, Registry, ToolDescriptor, ToolFailure,
};
use atomflow_core::xrd::{simulate_pxrd, PatternSettings, RadiationSource};
use common::agent::{fixed_policy, query, scripted};
use proptest::prelude::*;
use serde_json::{json, Value};

fn rt() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build().unwrap()
}

fn params() -> LlmParams {
    LlmParams::default()
}

/// Every (template value, resolved value) pair where the template held a
/// placeholder string.
fn placeholder_pairs<'a>(template: &'a Value, resolved: &'a Value, out: &mut Vec<(&'a str, &'a Value)>) {
    match (template, resolved) {
        (Value::String(s), r) if s.starts_with("$step") => out.push((s, r)),
        (Value::Object(t), Value::Object(r)) => {
            for (k, v) in t {
                placeholder_pairs(v, &r[k], out);
            }
        }
        (Value::Array(t), Value::Array(r)) => {
            for (a, b) in t.iter().zip(r) {
                placeholder_pairs(a, b, out);
            }
        }
        _ => {}
    }
}

fn follow<'a>(placeholder: &str, trace: &'a [StepRecord]) -> &'a Value {
    let mut parts = placeholder.trim_start_matches("$step").split('.');
    let id: u32 = parts.next().unwrap().parse().unwrap();
    let mut v = trace.iter().find(|r| r.step_id == id).unwrap().outcome.result().unwrap();
    for seg in parts {
        v = match seg.parse::<usize>() {
            Ok(i) if v.is_array() => &v[i],
            _ => &v[seg],
        };
    }
    v
}

#[test]
fn defect_pipeline_runs_green_and_passes_data_exactly() {
    let registry = Arc::new(default_registry());
    let backend = scripted();
    let q = query("defect_pipeline");
    let start = Instant::now();
    let a = rt().block_on(run_agent(&q, Arc::clone(&registry), &backend, &params(), &fixed_policy(), None)).unwrap();
    let b = rt().block_on(run_agent(&q, registry, &backend, &params(), &fixed_policy(), None)).unwrap();
    assert!(start.elapsed() < Duration::from_secs(30));

    let tools: Vec<&str> = a.plan.steps.iter().map(|s| s.tool.as_str()).collect();
    assert_eq!(
        tools,
        [
            "jarvis_dft_query", "get_structure", "make_supercell", "substitute_site", "relax_structure",
            "simulate_pxrd", "predict_properties", "bandstructure_stub", "compile_report", "compile_report"
        ]
    );
    assert_eq!(a.trace.len(), 10);
    for r in &a.trace {
        assert!(r.outcome.is_success(), "step {} {:?}", r.step_id, r.outcome);
        assert_eq!(r.attempts, 1);
    }
    let mut checked = 0;
    for (step, rec) in a.plan.steps.iter().zip(&a.trace) {
        let mut pairs = Vec::new();
        placeholder_pairs(&step.argument_template, &rec.resolved_arguments, &mut pairs);
        for (ph, resolved) in pairs {
            assert_eq!(serde_json::to_string(resolved).unwrap(), serde_json::to_string(follow(ph, &a.trace)).unwrap(), "{ph}");
            checked += 1;
        }
    }
    assert!(checked >= 11);
    assert_eq!(a.trace[3].resolved_arguments["poscar"], a.trace[2].outcome.result().unwrap()["poscar"]);
    assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    assert!(a.answer.contains("AlGa7N8"));
}

#[test]
fn interface_case_returns_coordinates() {
    let r = rt()
        .block_on(run_agent(&query("interface"), Arc::new(default_registry()), &scripted(), &params(), &fixed_policy(), None))
        .unwrap();
    let tools: Vec<&str> = r.plan.steps.iter().map(|s| s.tool.as_str()).collect();
    assert_eq!(tools, ["jarvis_dft_query", "jarvis_dft_query", "generate_interface", "compile_report"]);
    assert!(r.trace.iter().all(|t| t.outcome.is_success()));
    let iface = r.trace[2].outcome.result().unwrap();
    let report = &r.trace[3].outcome.result().unwrap()["structure"];
    assert_eq!(report["num_sites"], iface["num_sites"]);
    assert_eq!(report["sites"].as_array().unwrap().len() as u64, iface["num_sites"].as_u64().unwrap());
    assert_eq!(r.trace[2].resolved_arguments, json!({"jid_a": "JVASP-30", "jid_b": "JVASP-39214"}));
}

#[test]
fn pxrd_answer_quotes_simulated_peaks() {
    let r = rt()
        .block_on(run_agent(&query("pxrd"), Arc::new(default_registry()), &scripted(), &params(), &fixed_policy(), None))
        .unwrap();
    let si = atomflow_core::toolkit::Dataset::bundled().get("JVASP-1002").unwrap().structure.clone();
    let p = simulate_pxrd(&si, &RadiationSource::cu_k_alpha(), PatternSettings::default()).unwrap();
    assert!(p.peaks.len() >= 3);
    for pk in &p.peaks[..3] {
        let s = format!("{:.2}°", pk.two_theta);
        assert!(r.answer.contains(&s), "{s} missing from {}", r.answer);
    }
}

#[test]
fn single_tool_and_typo_retry() {
    let registry = default_registry();
    let backend = scripted();
    let p = rt().block_on(plan(&query("single_tool"), &registry, &backend, &params(), &PlanPolicy::default())).unwrap();
    assert_eq!(p.plan.len(), 1);
    assert_eq!(p.calls, 1);
    let p = rt().block_on(plan(&query("typo_retry"), &registry, &backend, &params(), &PlanPolicy::default())).unwrap();
    assert_eq!(p.calls, 2);
    assert_eq!(p.plan.steps[0].tool, "get_structure");
}

#[test]
fn pure_chat_has_no_trace() {
    let r = rt()
        .block_on(run_agent(&query("pure_chat"), Arc::new(default_registry()), &scripted(), &params(), &fixed_policy(), None))
        .unwrap();
    assert!(r.plan.is_empty() && r.trace.is_empty());
    assert!(r.answer.contains("Washington"));
}

#[test]
fn empty_trace_summary_is_plain_chat() {
    let mut b = ScriptedBackend::new();
    b.insert(&chat_messages("hello?"), "hi there");
    let s = rt().block_on(summarize("hello?", &[], &b, &params(), None)).unwrap();
    assert_eq!(s.text, "hi there");
    assert!(s.warnings.is_empty());
}

#[test]
fn planning_retries_are_bounded() {
    let calls = Arc::new(AtomicU32::new(0));
    let c = Arc::clone(&calls);
    let backend = FnBackend(move |_: &[ChatMessage]| {
        c.fetch_add(1, Ordering::SeqCst);
        Ok("I think it is wurtzite.".to_string())
    });
    for retries in [0, 1, 3] {
        calls.store(0, Ordering::SeqCst);
        let policy = PlanPolicy { max_retries: retries, ..Default::default() };
        let e = rt().block_on(plan("q", &default_registry(), &backend, &params(), &policy)).unwrap_err();
        assert_eq!(e, PlanningError::PlanningFailed { attempts: retries + 1, last_error: ParseError::NotJson });
        assert_eq!(calls.load(Ordering::SeqCst), retries + 1);
    }
}

#[test]
fn retry_conversation_carries_the_correction() {
    let backend = FnBackend(|m: &[ChatMessage]| {
        if m.len() == 2 {
            Ok(r#"{"tool": "get_structre", "arguments": {"jid": "JVASP-30"}}"#.to_string())
        } else {
            assert!(m[3].content.contains("Did you mean: get_structure"), "{}", m[3].content);
            Ok(r#"{"final_answer": "ok"}"#.to_string())
        }
    });
    let p = rt().block_on(plan("q", &default_registry(), &backend, &params(), &PlanPolicy::default())).unwrap();
    assert_eq!(p.direct_answer.as_deref(), Some("ok"));
}

fn fixed_reply(text: &'static str) -> FnBackend<impl Fn(&[ChatMessage]) -> Result<String, BackendError>> {
    FnBackend(move |_: &[ChatMessage]| Ok(text.to_string()))
}

#[test]
fn invalid_plans_fail_planning() {
    let undeclared = r#"{"steps": [
        {"step_id": 1, "tool": "get_structure", "arguments": {"jid": "JVASP-30"}},
        {"step_id": 2, "tool": "make_supercell", "arguments": {"poscar": "$step1.poscar", "scaling": [2, 2, 2]}}]}"#;
    let policy = PlanPolicy { max_retries: 0, ..Default::default() };
    let e = rt().block_on(plan("q", &default_registry(), &fixed_reply(undeclared), &params(), &policy)).unwrap_err();
    assert!(
        matches!(&e, PlanningError::PlanningFailed { last_error: ParseError::InvalidPlan(PlanError::UndeclaredReference { step: 2, referenced: 1 }), .. }),
        "{e:?}"
    );
    let cyclic = r#"{"steps": [
        {"step_id": 1, "tool": "get_structure", "arguments": {"jid": "JVASP-30"}, "depends_on": [2]},
        {"step_id": 2, "tool": "get_structure", "arguments": {"jid": "JVASP-39"}, "depends_on": [1]}]}"#;
    let e = rt().block_on(plan("q", &default_registry(), &fixed_reply(cyclic), &params(), &policy)).unwrap_err();
    assert!(
        matches!(&e, PlanningError::PlanningFailed { last_error: ParseError::InvalidPlan(PlanError::CycleDetected { .. }), .. }),
        "{e:?}"
    );
}

/// Registry of test tools: `sleep` waits `ms`, `fail` always fails
/// permanently, `flaky` fails transiently `fail_times` times per key, `count`
/// echoes `x`. Every invocation is counted per tool.
struct TestTools {
    registry: Arc<Registry>,
    counts: Arc<std::sync::Mutex<BTreeMap<String, u32>>>,
}

fn test_tools() -> TestTools {
    let counts: Arc<std::sync::Mutex<BTreeMap<String, u32>>> = Arc::default();
    let flaky_seen: Arc<std::sync::Mutex<HashMap<String, u32>>> = Arc::default();
    let mut r = Registry::new();
    let any_obj = || ObjectSchema::new().prop("x", P::any("")).prop("ms", P::integer("")).prop("fail_times", P::integer(""));
    let out = || ObjectSchema::new().prop("x", P::any("")).prop("bandgap", P::number(""));
    let desc = |name: &str| ToolDescriptor {
        name: name.into(),
        description: String::new(),
        params: any_obj(),
        result: out(),
        enabled: true,
        example: None,
    };
    let bump = |counts: &Arc<std::sync::Mutex<BTreeMap<String, u32>>>, name: &str| {
        *counts.lock().unwrap().entry(name.to_string()).or_default() += 1;
    };
    let c = Arc::clone(&counts);
    r.register(desc("sleep"), move |a| {
        bump(&c, "sleep");
        std::thread::sleep(Duration::from_millis(a["ms"].as_u64().unwrap_or(0)));
        Ok(json!({"x": a["x"]}))
    })
    .unwrap();
    let c = Arc::clone(&counts);
    r.register(desc("fail"), move |_| {
        bump(&c, "fail");
        Err(ToolFailure::invalid("broken", "always fails"))
    })
    .unwrap();
    let c = Arc::clone(&counts);
    r.register(desc("flaky"), move |a| {
        bump(&c, "flaky");
        let mut seen = flaky_seen.lock().unwrap();
        let n = seen.entry(a["x"].to_string()).or_default();
        *n += 1;
        if *n <= a["fail_times"].as_u64().unwrap_or(0) as u32 {
            Err(ToolFailure::transient("try again"))
        } else {
            Ok(json!({"x": a["x"]}))
        }
    })
    .unwrap();
    let c = Arc::clone(&counts);
    r.register(desc("count"), move |a| {
        bump(&c, "count");
        Ok(json!({"x": a["x"], "bandgap": -0.2}))
    })
    .unwrap();
    TestTools { registry: Arc::new(r), counts }
}

fn st(id: u32, tool: &str, args: Value, deps: &[u32]) -> PlanStep {
    PlanStep { step_id: id, tool: tool.into(), argument_template: args, depends_on: deps.to_vec(), rationale: String::new() }
}

fn fast_policy() -> ExecPolicy {
    ExecPolicy { backoff: Backoff { base: Duration::from_millis(1), factor: 2.0, max: Duration::from_millis(4) }, ..Default::default() }
}

#[test]
fn independent_steps_run_concurrently() {
    let t = test_tools();
    let plan = WorkflowPlan { steps: vec![st(1, "sleep", json!({"ms": 100, "x": 1}), &[]), st(2, "sleep", json!({"ms": 100, "x": 2}), &[])] };
    let policy = ExecPolicy { max_parallel: 2, ..fast_policy() };
    let runtime = rt();
    let start = Instant::now();
    let trace = runtime.block_on(execute(&plan, Arc::clone(&t.registry), &policy, None));
    let wall = start.elapsed();
    assert!(trace.iter().all(|r| r.outcome.is_success()));
    assert!(wall < Duration::from_millis(180), "{wall:?}");
}

#[test]
fn failed_dependency_skips_dependents_without_invoking() {
    let t = test_tools();
    let plan = WorkflowPlan {
        steps: vec![
            st(1, "fail", json!({}), &[]),
            st(2, "count", json!({"x": "$step1.x"}), &[1]),
            st(3, "count", json!({"x": "$step2.x"}), &[2]),
            st(4, "count", json!({"x": 4}), &[]),
        ],
    };
    let trace = rt().block_on(execute(&plan, Arc::clone(&t.registry), &fast_policy(), None));
    assert_eq!(trace.len(), 4);
    assert!(matches!(trace[0].outcome, StepOutcome::Failed { .. }));
    assert_eq!(trace[0].attempts, 1);
    assert_eq!(trace[1].outcome, StepOutcome::SkippedFailed { failed_dependency: 1 });
    assert_eq!(trace[2].outcome, StepOutcome::SkippedFailed { failed_dependency: 1 });
    assert!(trace[3].outcome.is_success());
    assert_eq!(t.counts.lock().unwrap().get("count"), Some(&1));
}

#[test]
fn transient_failures_retry_within_bound() {
    let t = test_tools();
    let plan = WorkflowPlan {
        steps: vec![st(1, "flaky", json!({"x": "a", "fail_times": 2}), &[]), st(2, "flaky", json!({"x": "b", "fail_times": 9}), &[])],
    };
    let policy = ExecPolicy { max_retries: 3, ..fast_policy() };
    let trace = rt().block_on(execute(&plan, Arc::clone(&t.registry), &policy, None));
    assert!(trace[0].outcome.is_success());
    assert_eq!(trace[0].attempts, 3);
    match &trace[1].outcome {
        StepOutcome::Failed { error } => assert_eq!(error.kind, FailureKind::Transient),
        other => panic!("{other:?}"),
    }
    assert_eq!(trace[1].attempts, 4);
}

#[test]
fn missing_placeholder_path_fails_without_invoking() {
    let t = test_tools();
    let plan = WorkflowPlan { steps: vec![st(1, "count", json!({"x": 1}), &[]), st(2, "sleep", json!({"x": "$step1.nope"}), &[1])] };
    let trace = rt().block_on(execute(&plan, Arc::clone(&t.registry), &fast_policy(), None));
    match &trace[1].outcome {
        StepOutcome::Failed { error } => assert_eq!(error.code, "unresolved_placeholder"),
        other => panic!("{other:?}"),
    }
    assert_eq!(trace[1].attempts, 0);
    assert_eq!(t.counts.lock().unwrap().get("sleep"), None);
}

#[test]
fn step_timeout_is_enforced() {
    let t = test_tools();
    let plan = WorkflowPlan { steps: vec![st(1, "sleep", json!({"ms": 300}), &[])] };
    let policy = ExecPolicy { max_retries: 0, step_timeout: Duration::from_millis(50), ..fast_policy() };
    let trace = rt().block_on(execute(&plan, Arc::clone(&t.registry), &policy, None));
    match &trace[0].outcome {
        StepOutcome::Failed { error } => assert_eq!(error.code, "timeout"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn lint_warning_survives_any_summary_text() {
    let t = test_tools();
    let backend = FnBackend(|m: &[ChatMessage]| {
        if m[0].content.contains("Reply formats") {
            Ok(r#"{"tool": "count", "arguments": {"x": 1}}"#.to_string())
        } else {
            Ok("All values look fine.".to_string())
        }
    });
    let r = rt().block_on(run_agent("q", Arc::clone(&t.registry), &backend, &params(), &fixed_policy(), None)).unwrap();
    assert_eq!(r.answer, "All values look fine.");
    assert!(r.warnings.iter().any(|w| w.contains("negative bandgap")), "{:?}", r.warnings);
}

#[test]
fn events_stream_in_order() {
    let (tx, mut rx) = tokio::sync::mpsc::unbounded_channel();
    let r = rt()
        .block_on(run_agent(&query("pxrd"), Arc::new(default_registry()), &scripted(), &params(), &fixed_policy(), Some(&tx)))
        .unwrap();
    drop(tx);
    let mut kinds = Vec::new();
    let mut text = String::new();
    while let Ok(e) = rx.try_recv() {
        let v = serde_json::to_value(&e).unwrap();
        if v["event"] == "token" {
            text.push_str(v["text"].as_str().unwrap());
        }
        kinds.push(v["event"].as_str().unwrap().to_string());
    }
    assert_eq!(kinds.first().map(String::as_str), Some("plan"));
    assert_eq!(kinds.last().map(String::as_str), Some("final"));
    assert_eq!(kinds.iter().filter(|k| *k == "step_finished").count(), 3);
    assert_eq!(text, r.answer);
}

/// Acyclicity by depth-first search, independent of the Kahn implementation.
fn has_cycle(deps: &BTreeMap<u32, Vec<u32>>) -> bool {
    fn visit(n: u32, deps: &BTreeMap<u32, Vec<u32>>, state: &mut HashMap<u32, u8>) -> bool {
        match state.get(&n) {
            Some(1) => return true,
            Some(2) => return false,
            _ => {}
        }
        state.insert(n, 1);
        for &d in &deps[&n] {
            if visit(d, deps, state) {
                return true;
            }
        }
        state.insert(n, 2);
        false
    }
    let mut state = HashMap::new();
    deps.keys().any(|&n| visit(n, deps, &mut state))
}

fn random_plan() -> impl Strategy<Value = (Vec<Vec<u32>>, Vec<bool>)> {
    (1usize..=8).prop_flat_map(|n| {
        (prop::collection::vec(prop::collection::vec(1u32..=n as u32, 0..3), n), prop::collection::vec(any::<bool>(), n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn plan_validation_matches_dfs(sample in random_plan()) {
        let (deps, _) = sample;
        let t = test_tools();
        let mut graph = BTreeMap::new();
        let mut steps = Vec::new();
        for (i, d) in deps.iter().enumerate() {
            let id = i as u32 + 1;
            let mut d = d.clone();
            d.sort();
            d.dedup();
            graph.insert(id, d.clone());
            steps.push(st(id, "count", json!({"x": id}), &d));
        }
        let plan = WorkflowPlan { steps };
        let got = validate_plan(&plan, &t.registry);
        if has_cycle(&graph) {
            let is_cycle = matches!(got, Err(PlanError::CycleDetected { .. }));
            prop_assert!(is_cycle, "{:?}", got);
        } else {
            let order = got.unwrap();
            let pos: HashMap<u32, usize> = order.iter().enumerate().map(|(i, &id)| (id, i)).collect();
            for (id, d) in &graph {
                for dep in d {
                    prop_assert!(pos[dep] < pos[id]);
                }
            }
        }
    }

    #[test]
    fn execution_never_runs_past_a_failure(sample in random_plan()) {
        let (deps, failing) = sample;
        // forward-only edges keep the plan acyclic
        let mut steps = Vec::new();
        let mut graph: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (i, d) in deps.iter().enumerate() {
            let id = i as u32 + 1;
            let mut d: Vec<u32> = d.iter().copied().filter(|&x| x < id).collect();
            d.sort();
            d.dedup();
            graph.insert(id, d.clone());
            let tool = if failing[i] { "fail" } else { "count" };
            steps.push(st(id, tool, json!({"x": id}), &d));
        }
        let t = test_tools();
        let plan = WorkflowPlan { steps };
        let trace = rt().block_on(execute(&plan, Arc::clone(&t.registry), &fast_policy(), None));
        prop_assert_eq!(trace.len(), plan.len());
        let ids: Vec<u32> = trace.iter().map(|r| r.step_id).collect();
        prop_assert_eq!(ids, (1..=plan.len() as u32).collect::<Vec<_>>());
        // expected outcome per step by forward propagation
        let mut ok = BTreeMap::new();
        let mut invoked = 0;
        for (id, d) in &graph {
            let deps_ok = d.iter().all(|x| ok[x]);
            let fine = deps_ok && !failing[*id as usize - 1];
            if deps_ok {
                invoked += 1;
            }
            ok.insert(*id, fine);
            let rec = &trace[*id as usize - 1];
            prop_assert_eq!(rec.outcome.is_success(), fine);
            if !deps_ok {
                let skipped = matches!(rec.outcome, StepOutcome::SkippedFailed { .. });
                prop_assert!(skipped);
                prop_assert_eq!(rec.attempts, 0);
            }
        }
        let counts = t.counts.lock().unwrap();
        let total: u32 = counts.values().sum();
        prop_assert_eq!(total, invoked);
    }
}

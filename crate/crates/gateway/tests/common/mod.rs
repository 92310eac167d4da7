#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use atomflow_core::agent::{LlmBackend, ScriptedBackend};
use atomflow_core::clock::Clock;
use atomflow_core::toolkit::default_registry;
use atomflow_gateway::{app, AppState, GatewayConfig};
use axum::body::{to_bytes, Body, Bytes};
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const SECRET: &str = "test-secret";

/// One key with a bucket large enough never to interfere.
pub fn config() -> GatewayConfig {
    config_with_bucket(1e9, 1e9)
}

pub fn config_with_bucket(capacity: f64, refill_rate: f64) -> GatewayConfig {
    let mut c = GatewayConfig::default();
    c.keys = vec![serde_json::from_value(json!({
        "key_id": "tester", "secret": SECRET, "bucket": {"capacity": capacity, "refill_rate": refill_rate}
    }))
    .unwrap()];
    c
}

pub fn fixtures_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn scripted() -> Arc<dyn LlmBackend> {
    Arc::new(ScriptedBackend::from_file(fixtures_path().join("agent_fixtures.json")).unwrap())
}

pub fn case_query(name: &str) -> String {
    let cases: Value = serde_json::from_str(&std::fs::read_to_string(fixtures_path().join("cases.json")).unwrap()).unwrap();
    cases.as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()["query"].as_str().unwrap().to_string()
}

pub fn gateway(config: GatewayConfig) -> (Router, Arc<AppState>) {
    app(config, Arc::new(default_registry()), Some(scripted())).unwrap()
}

/// A concrete body for each published tool route.
pub fn fixture_body(tool: &str) -> Value {
    match tool {
        "jarvis_dft_query" => json!({"formula": "GaN"}),
        "predict_properties" => json!({"jid": "JVASP-1151"}),
        "relax_structure" => json!({"jid": "JVASP-30"}),
        "generate_interface" => json!({"jid_a": "JVASP-30", "jid_b": "JVASP-39214"}),
        "simulate_pxrd" => json!({"jid": "JVASP-1002"}),
        "bandstructure_stub" => json!({"jid": "JVASP-1002"}),
        other => panic!("no fixture body for {other}"),
    }
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Bytes,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("not JSON ({e}): {:?}", self.body))
    }

    pub fn cache(&self) -> Option<&str> {
        self.headers.get("cache").and_then(|v| v.to_str().ok())
    }
}

pub async fn send(router: &Router, method: Method, path: &str, body: Option<&Value>, key: Option<&str>) -> Reply {
    let mut req = Request::builder().method(method).uri(path).header("content-type", "application/json");
    if let Some(k) = key {
        req = req.header("authorization", format!("Bearer {k}"));
    }
    let body = body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty);
    let resp = router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    Reply { status, headers, body }
}

pub async fn post(router: &Router, path: &str, body: &Value) -> Reply {
    send(router, Method::POST, path, Some(body), Some(SECRET)).await
}

pub async fn get(router: &Router, path: &str) -> Reply {
    send(router, Method::GET, path, None, Some(SECRET)).await
}

/// Polls a job until it reaches a terminal state.
pub async fn wait_job(router: &Router, job_id: &str) -> Value {
    for _ in 0..2000 {
        let r = get(router, &format!("/jobs/{job_id}")).await;
        assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
        let rec = r.json();
        if rec["state"] == "done" || rec["state"] == "failed" {
            return rec;
        }
        tokio::time::sleep(std::time::Duration::from_millis(5)).await;
    }
    panic!("job {job_id} did not finish");
}

/// The envelope every non-2xx body must match: exactly code, message, hint.
pub fn assert_envelope(r: &Reply) {
    let v = r.json();
    let obj = v.as_object().unwrap_or_else(|| panic!("error body is not an object: {v}"));
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["code", "hint", "message"], "{v}");
    assert!(v["code"].is_string() && v["message"].is_string());
    assert!(v["hint"].is_string() || v["hint"].is_null());
}

/// Clock the test advances by hand.
#[derive(Default)]
pub struct ManualClock(pub AtomicU64);

impl ManualClock {
    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

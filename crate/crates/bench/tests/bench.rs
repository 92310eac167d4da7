use std::process::Command;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use atomflow_bench::*;
use atomflow_core::agent::{BackendError, ChatMessage, ChatResponse, DeltaSink, LlmBackend, LlmParams, ScriptedBackend, Usage};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tokio::io::{AsyncReadExt, AsyncWriteExt};

/// Simulated seconds, advanced only by the backend below.
#[derive(Default, Clone)]
struct SimClock(Arc<Mutex<f64>>);

impl MonotonicClock for SimClock {
    fn now(&self) -> f64 {
        *self.0.lock().unwrap()
    }
}

/// Streams `tokens` deltas per call spread evenly over `seconds`, cycling
/// through the given (tokens, seconds) pairs run by run.
struct PacedBackend {
    clock: SimClock,
    schedule: Vec<(u32, f64)>,
    calls: Mutex<usize>,
}

#[async_trait]
impl LlmBackend for PacedBackend {
    async fn chat(&self, _m: &[ChatMessage], _p: &LlmParams) -> Result<ChatResponse, BackendError> {
        unimplemented!("only streaming is measured")
    }

    async fn chat_stream(&self, _m: &[ChatMessage], _p: &LlmParams, sink: DeltaSink<'_>) -> Result<ChatResponse, BackendError> {
        let (tokens, seconds) = {
            let mut c = self.calls.lock().unwrap();
            *c += 1;
            self.schedule[(*c - 1) % self.schedule.len()]
        };
        // queueing before the first token is excluded from the measurement
        *self.clock.0.lock().unwrap() += 5.0;
        let start = self.clock.now();
        for i in 0..tokens {
            *self.clock.0.lock().unwrap() = start + seconds * f64::from(i) / f64::from(tokens - 1);
            sink(" tok");
        }
        Ok(ChatResponse { text: " tok".repeat(tokens as usize), usage: Usage::default(), latency: Duration::ZERO })
    }
}

fn paced(schedule: Vec<(u32, f64)>) -> (PacedBackend, SimClock) {
    let clock = SimClock::default();
    (PacedBackend { clock: clock.clone(), schedule, calls: Mutex::new(0) }, clock)
}

fn prompts() -> Vec<String> {
    vec!["Describe diffraction.".to_string()]
}

#[tokio::test]
async fn hundred_tokens_in_one_second() {
    let (b, clock) = paced(vec![(100, 1.0)]);
    let r = measure_tps(&b, &LlmParams::default(), &prompts(), 3, &clock).await.unwrap();
    assert!((r.mean_tps - 100.0).abs() < 1e-9, "{}", r.mean_tps);
    assert!(r.std_tps.abs() < 1e-9);
    assert_eq!(r.runs.len(), 3);
    assert_eq!(r.model, "gpt-oss-20b");
}

#[tokio::test]
async fn mean_and_std_over_runs() {
    let (b, clock) = paced(vec![(50, 1.0), (300, 2.0)]);
    let r = measure_tps(&b, &LlmParams::default(), &prompts(), 2, &clock).await.unwrap();
    assert!((r.mean_tps - 100.0).abs() < 1e-9);
    assert!((r.std_tps - 50.0).abs() < 1e-9);
}

#[tokio::test]
async fn invalid_runs() {
    let (b, clock) = paced(vec![(10, 1.0)]);
    let p = LlmParams::default();
    assert_eq!(measure_tps(&b, &p, &prompts(), 0, &clock).await.unwrap_err(), TpsError::InvalidRuns);
    assert_eq!(measure_tps(&b, &p, &[], 1, &clock).await.unwrap_err(), TpsError::NoPrompts);
    let (one, clock) = paced(vec![(1, 1.0)]);
    assert!(matches!(measure_tps(&one, &p, &prompts(), 1, &clock).await, Err(TpsError::TooFewTokens { tokens: 1, .. })));
    assert_eq!(TpsResult::from_runs("m", vec![]).unwrap_err(), TpsError::InvalidRuns);
}

#[tokio::test]
async fn scripted_backend_with_wall_clock() {
    let mut b = ScriptedBackend::new().with_token_delay(Duration::from_millis(2));
    b.insert(&[ChatMessage::user("q")], "one two three four five six seven eight nine ten");
    let r = measure_tps(&b, &LlmParams::default(), &["q".to_string()], 2, &WallClock::new()).await.unwrap();
    assert!(r.runs.iter().all(|x| x.completion_tokens == 10));
    // nine gaps of at least 2 ms bound the rate from above
    assert!(r.mean_tps > 0.0 && r.mean_tps <= 10.0 / 0.018 + 1e-9, "{}", r.mean_tps);
}

#[test]
fn published_speedups() {
    let base = ModelSpeed::new("llama-3.2-90b-vision", 36.1);
    let others = [
        ModelSpeed::new("gpt-oss-20b", 141.7),
        ModelSpeed::new("gpt-oss-120b", 122.3),
        ModelSpeed::new("qwen3-next-80b", 95.8),
        ModelSpeed::new("kimi-k2", 53.3),
    ];
    let rows = speedup_table(&base, &others).unwrap();
    let got: Vec<f64> = rows.iter().map(|r| r.speedup).collect();
    assert_eq!(got[0], 1.0);
    for (g, want) in got[1..].iter().zip([3.93, 3.39, 2.66, 1.48]) {
        assert!((g - want).abs() <= 0.01 + 1e-12, "{g} vs {want}");
    }
    assert_eq!(&got[1..3], &[3.93, 3.39]);
    assert!(speedup_table(&ModelSpeed::new("x", 0.0), &others).is_err());
}

proptest! {
    #[test]
    fn baseline_against_itself_is_one(tps in 0.001f64..1e6) {
        let b = ModelSpeed::new("b", tps);
        let rows = speedup_table(&b, std::slice::from_ref(&b)).unwrap();
        prop_assert_eq!(rows[0].speedup, 1.0);
        prop_assert_eq!(rows[1].speedup, 1.0);
    }

    #[test]
    fn mae_is_symmetric(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
        let (p, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let a = parity_stats(&p, &r).unwrap();
        let b = parity_stats(&r, &p).unwrap();
        prop_assert!((a.mae - b.mae).abs() <= 1e-9 * (1.0 + a.mae));
        prop_assert!(a.mae >= 0.0);
        if let Some(r2) = a.r_squared {
            prop_assert!(r2 <= 1.0);
        }
    }
}

#[test]
fn parity_hand_cases() {
    let xs = [1.0, 2.5, 4.0, 7.0];
    let same = parity_stats(&xs, &xs).unwrap();
    assert_eq!((same.mae, same.r_squared), (0.0, Some(1.0)));
    let half = parity_stats(&[1.0, 2.0], &[2.0, 4.0]).unwrap();
    assert_eq!(half.mae, 1.5);
    // squared residuals 1 + 4 over reference sum of squares 1 + 1
    assert_eq!(half.r_squared, Some(1.0 - 5.0 / 2.0));
    // swapping changes R² because the variance comes from the reference
    let swapped = parity_stats(&[2.0, 4.0], &[1.0, 2.0]).unwrap();
    assert_eq!(swapped.mae, 1.5);
    assert_eq!(swapped.r_squared, Some(1.0 - 5.0 / 0.5));

    let flat = parity_stats(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
    assert_eq!((flat.r_squared, flat.r_squared_absent), (None, Some(RSquaredAbsent::DegenerateReference)));
    let single = parity_stats(&[1.0], &[2.0]).unwrap();
    assert_eq!(single.r_squared_absent, Some(RSquaredAbsent::TooFewSamples));
    assert_eq!(parity_stats(&[1.0], &[1.0, 2.0]).unwrap_err(), ParityError::LengthMismatch { predicted: 1, reference: 2 });
    assert_eq!(parity_stats(&[], &[]).unwrap_err(), ParityError::Empty);
    assert_eq!(parity_stats(&[f64::NAN, 1.0], &[1.0, 2.0]).unwrap_err(), ParityError::NonFinite { index: 0 });
}

/// Smallest sample value whose cumulative share reaches p percent.
fn brute_percentile(sample: &[f64], p: f64) -> f64 {
    let n = sample.len() as f64;
    let mut candidates = sample.to_vec();
    candidates.sort_by(f64::total_cmp);
    *candidates
        .iter()
        .find(|&&v| sample.iter().filter(|&&x| x <= v).count() as f64 / n >= p / 100.0)
        .unwrap()
}

#[test]
fn nearest_rank_matches_brute_force() {
    let mut rng = StdRng::seed_from_u64(2024);
    for _ in 0..100 {
        let n = rng.gen_range(1..200);
        // distinct values keep the cumulative-share oracle unambiguous
        let mut sample: Vec<f64> = (0..n).map(|i| rng.gen_range(0.0..10.0) + i as f64 * 1e-9).collect();
        sample.dedup();
        let mut sorted = sample.clone();
        sorted.sort_by(f64::total_cmp);
        for p in [1.0, 5.0, 25.0, 50.0, 75.0, 90.0, 95.0, 99.0, 100.0, rng.gen_range(0.5..100.0)] {
            assert_eq!(nearest_rank(&sorted, p), Some(brute_percentile(&sample, p)), "n={n} p={p}");
        }
    }
}

#[tokio::test(start_paused = true)]
async fn constant_stub_latency() {
    let t = Target::Stub(StubProfile::Constant { latency: Duration::from_millis(200) });
    let r = load_sim(&t, 10, 2.0, 5).await.unwrap();
    assert_eq!(r.latencies.len(), 50);
    assert!((r.mean - 0.2).abs() < 1e-9 && (r.p95 - 0.2).abs() < 1e-9, "{r:?}");
    assert_eq!(r.errors, 0);
}

#[tokio::test(start_paused = true)]
async fn ramped_cycle_of_latencies() {
    let t = Target::Stub(StubProfile::parse("range:1:100").unwrap());
    for users in [1, 4, 10] {
        let r = load_sim(&t, users, 0.5, 100 / users).await.unwrap();
        assert_eq!(r.latencies.len(), 100);
        assert!((r.mean - 0.0505).abs() < 1e-9, "{users}: {}", r.mean);
        assert!((r.p50 - 0.050).abs() < 1e-9 && (r.p95 - 0.095).abs() < 1e-9 && (r.max - 0.1).abs() < 1e-9);
        assert!(r.p50 <= r.p95 && r.p95 <= r.max);
    }
}

#[tokio::test]
async fn load_errors() {
    let t = Target::Stub(StubProfile::Constant { latency: Duration::ZERO });
    assert_eq!(load_sim(&t, 0, 1.0, 1).await.unwrap_err(), LoadError::NoUsers);
    assert_eq!(load_sim(&t, 1, 1.0, 0).await.unwrap_err(), LoadError::NoRequests);
    assert_eq!(load_sim(&t, 1, -1.0, 1).await.unwrap_err(), LoadError::BadRamp);
    assert!(StubProfile::parse("gaussian:1").is_err());
    assert!(StubProfile::parse("range:5:1").is_err());
    assert_eq!(
        StubProfile::parse("list:1,2.5").unwrap(),
        StubProfile::Cycle { latencies: vec![Duration::from_millis(1), Duration::from_micros(2500)] }
    );
}

/// Minimal HTTP server answering every request with `status`.
async fn tiny_server(status: &'static str) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        loop {
            let (mut sock, _) = listener.accept().await.unwrap();
            tokio::spawn(async move {
                let mut buf = vec![0u8; 4096];
                let mut seen = Vec::new();
                loop {
                    let n = sock.read(&mut buf).await.unwrap_or(0);
                    if n == 0 {
                        return;
                    }
                    seen.extend_from_slice(&buf[..n]);
                    let text = String::from_utf8_lossy(&seen);
                    if let Some(head_end) = text.find("\r\n\r\n") {
                        let len = text[..head_end]
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                            .unwrap_or(0);
                        if seen.len() >= head_end + 4 + len {
                            let resp = format!("HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: 2\r\n\r\n{{}}");
                            sock.write_all(resp.as_bytes()).await.unwrap();
                            seen.clear();
                        }
                    }
                }
            });
        }
    });
    format!("http://{addr}/pxrd/query")
}

#[tokio::test]
async fn http_target_counts_errors() {
    let ok = Target::Http { url: tiny_server("200 OK").await, api_key: Some("k".into()), body: serde_json::json!({"jid": "x"}) };
    let r = load_sim(&ok, 3, 0.05, 4).await.unwrap();
    assert_eq!((r.latencies.len(), r.errors), (12, 0));
    let bad = Target::Http { url: tiny_server("429 Too Many Requests").await, api_key: None, body: serde_json::json!({}) };
    let r = load_sim(&bad, 2, 0.0, 2).await.unwrap();
    assert_eq!(r.errors, 4);
}

fn bench(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bench")).args(args).output().unwrap();
    (out.status.success(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn cli_reports() {
    let dir = std::env::temp_dir().join(format!("bench-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("p.csv");
    let r = dir.join("r.csv");
    std::fs::write(&p, "bulk_modulus\n1\n2\n").unwrap();
    std::fs::write(&r, "bulk_modulus\n2\n4\n").unwrap();
    let (ok, out, err) = bench(&["parity", "--predicted", p.to_str().unwrap(), "--reference", r.to_str().unwrap(), "--column", "bulk_modulus", "--table"]);
    assert!(ok, "{err}");
    let json_end = out.find("\n\n").unwrap();
    let v: serde_json::Value = serde_json::from_str(&out[..json_end]).unwrap();
    assert_eq!(v["mae"], 1.5);
    assert!(out[json_end..].contains("MAE"));

    let (ok, out, err) = bench(&["load", "--target", "stub:constant:5", "--users", "3", "--requests", "2", "--ramp", "0.01"]);
    assert!(ok, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["latencies"].as_array().unwrap().len(), 6);

    let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/prompts.json");
    let (ok, out, err) = bench(&["tps", "--backend", &format!("scripted:{fixtures}"), "--runs", "3", "--token-delay-ms", "1", "--baseline-tps", "36.1"]);
    assert!(ok, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 3);
    assert_eq!(v["speedup"][0]["speedup"], 1.0);

    let (ok, _, err) = bench(&["load", "--target", "stub:constant:5", "--users", "0"]);
    assert!(!ok && err.contains("at least one user"));
    std::fs::remove_dir_all(dir).ok();
}

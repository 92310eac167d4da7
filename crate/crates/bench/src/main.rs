use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::Value;

use atomflow_bench::table::render;
use atomflow_bench::{load_sim, measure_tps, parity_stats, speedup_table, ModelSpeed, StubProfile, Target, WallClock};
use atomflow_core::agent::{ChatMessage, LlmBackend, LlmParams, RemoteBackend, ScriptedBackend};

/// Throughput, load and parity benchmarks. Every command prints a JSON report.
#[derive(Parser)]
#[command(name = "bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Also print an aligned text table after the JSON.
    #[arg(long, global = true)]
    table: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Tokens per second of streamed completions.
    Tps {
        /// Chat-completions base URL, or scripted:<file> for recorded replies.
        #[arg(long)]
        backend: String,
        #[arg(long, default_value = "gpt-oss-20b")]
        model: String,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// JSON array of {prompt, response}; only prompts are used against a URL.
        #[arg(long)]
        prompts: Option<PathBuf>,
        /// Delay between scripted tokens.
        #[arg(long, default_value_t = 10)]
        token_delay_ms: u64,
        #[arg(long, env = "ATOMFLOW_LLM_API_KEY")]
        api_key: Option<String>,
        /// Mean throughput of a baseline model to compute a speedup against.
        #[arg(long)]
        baseline_tps: Option<f64>,
        #[arg(long, default_value = "baseline")]
        baseline_model: String,
    },
    /// Concurrent virtual users against a URL or a stub with injected latency.
    Load {
        /// URL to POST to, or stub:<constant:MS | range:LO:HI | list:MS,MS,...>.
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 10)]
        users: usize,
        /// Seconds over which user start times are spread.
        #[arg(long, default_value_t = 1.0)]
        ramp: f64,
        #[arg(long, default_value_t = 5)]
        requests: usize,
        /// JSON request body for URL targets.
        #[arg(long, default_value = "{}")]
        body: String,
        #[arg(long, env = "ATOMFLOW_API_KEY")]
        api_key: Option<String>,
    },
    /// MAE and R² between two columns of numbers.
    Parity {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Column name or zero-based index; defaults to the first column.
        #[arg(long)]
        column: Option<String>,
    },
}

#[derive(Deserialize)]
struct PromptPair {
    prompt: String,
    #[serde(default)]
    response: Option<String>,
}

fn default_prompts() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/prompts.json")
}

fn load_pairs(path: &Path) -> Result<Vec<PromptPair>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// A scripted file is either prompt/response pairs or a recorded fixture map.
fn scripted_backend(path: &Path, delay: Duration) -> Result<ScriptedBackend, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let backend = match serde_json::from_str::<Vec<PromptPair>>(&text) {
        Ok(pairs) => {
            let mut b = ScriptedBackend::new();
            for p in pairs {
                b.insert(&[ChatMessage::user(p.prompt)], p.response.unwrap_or_default());
            }
            b
        }
        Err(_) => ScriptedBackend::from_json(&text).map_err(|e| e.to_string())?,
    };
    Ok(backend.with_token_delay(delay))
}

/// Reads one column of numbers. A first row that does not parse is a header.
fn read_column(path: &Path, column: Option<&str>) -> Result<Vec<f64>, String> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut rows = rdr.records();
    let first = match rows.next() {
        Some(r) => r.map_err(|e| e.to_string())?,
        None => return Ok(Vec::new()),
    };
    let is_header = first.iter().all(|c| c.trim().parse::<f64>().is_err());
    let index = match column {
        None => 0,
        Some(c) => match c.parse::<usize>() {
            Ok(i) => i,
            Err(_) if is_header => first.iter().position(|h| h.trim() == c).ok_or_else(|| format!("{}: no column '{c}'", path.display()))?,
            Err(_) => return Err(format!("{}: no header row to find '{c}' in", path.display())),
        },
    };
    let mut out = Vec::new();
    let data = (!is_header).then_some(Ok(first)).into_iter().chain(rows);
    for (line, rec) in data.enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let cell = rec.get(index).ok_or_else(|| format!("{}: row {} has no column {index}", path.display(), line + 1))?;
        if cell.trim().is_empty() {
            continue;
        }
        out.push(cell.trim().parse().map_err(|_| format!("{}: '{cell}' is not a number", path.display()))?);
    }
    Ok(out)
}

fn fmt(x: f64) -> String {
    format!("{x:.3}")
}

async fn run(cli: Cli) -> Result<(Value, Option<String>), String> {
    match cli.command {
        Command::Tps { backend, model, runs, prompts, token_delay_ms, api_key, baseline_tps, baseline_model } => {
            let delay = Duration::from_millis(token_delay_ms);
            let pairs = load_pairs(&prompts.clone().unwrap_or_else(default_prompts))?;
            let texts: Vec<String> = pairs.into_iter().map(|p| p.prompt).collect();
            let backend: Box<dyn LlmBackend> = match backend.strip_prefix("scripted:") {
                Some(path) => Box::new(scripted_backend(Path::new(path), delay)?),
                None => {
                    let mut b = RemoteBackend::new(backend);
                    if let Some(k) = api_key {
                        b = b.with_api_key(k);
                    }
                    Box::new(b)
                }
            };
            let params = LlmParams { model, ..LlmParams::default() };
            let result = measure_tps(backend.as_ref(), &params, &texts, runs, &WallClock::new()).await.map_err(|e| e.to_string())?;
            let mut report = serde_json::to_value(&result).map_err(|e| e.to_string())?;
            let mut table = render(
                &["run", "tokens", "seconds", "tokens/s"],
                &result
                    .runs
                    .iter()
                    .enumerate()
                    .map(|(i, r)| vec![(i + 1).to_string(), r.completion_tokens.to_string(), fmt(r.elapsed), fmt(r.tps())])
                    .collect::<Vec<_>>(),
            );
            if let Some(b) = baseline_tps {
                let rows = speedup_table(&ModelSpeed::new(baseline_model, b), &[ModelSpeed::from(&result)]).map_err(|e| e.to_string())?;
                report["speedup"] = serde_json::to_value(&rows).map_err(|e| e.to_string())?;
                table.push('\n');
                table.push_str(&render(
                    &["model", "tokens/s", "speedup"],
                    &rows.iter().map(|r| vec![r.model.clone(), format!("{:.1}", r.mean_tps), format!("{:.2}×", r.speedup)]).collect::<Vec<_>>(),
                ));
            }
            Ok((report, Some(table)))
        }
        Command::Load { target, users, ramp, requests, body, api_key } => {
            let target = match target.strip_prefix("stub:") {
                Some(profile) => Target::Stub(StubProfile::parse(profile).map_err(|e| e.to_string())?),
                None => Target::Http { url: target, api_key, body: serde_json::from_str(&body).map_err(|e| format!("--body: {e}"))? },
            };
            let report = load_sim(&target, users, ramp, requests).await.map_err(|e| e.to_string())?;
            let table = render(
                &["users", "requests", "errors", "mean s", "p50 s", "p95 s", "max s"],
                &[vec![
                    report.n_users.to_string(),
                    report.latencies.len().to_string(),
                    report.errors.to_string(),
                    fmt(report.mean),
                    fmt(report.p50),
                    fmt(report.p95),
                    fmt(report.max),
                ]],
            );
            Ok((serde_json::to_value(&report).map_err(|e| e.to_string())?, Some(table)))
        }
        Command::Parity { predicted, reference, column } => {
            let p = read_column(&predicted, column.as_deref())?;
            let r = read_column(&reference, column.as_deref())?;
            let stats = parity_stats(&p, &r).map_err(|e| e.to_string())?;
            let r2 = stats.r_squared.map(|x| format!("{x:.4}")).unwrap_or_else(|| "absent".into());
            let table = render(&["n", "MAE", "R²"], &[vec![stats.n.to_string(), format!("{:.4}", stats.mae), r2]]);
            Ok((serde_json::to_value(&stats).map_err(|e| e.to_string())?, Some(table)))
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let want_table = cli.table;
    match run(cli).await {
        Ok((report, table)) => {
            println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
            if let (true, Some(t)) = (want_table, table) {
                print!("\n{t}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

//! Shared state, routing, authentication and request handlers.

use std::convert::Infallible;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock, Weak};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::mpsc;

use atomflow_core::agent::{
    run_agent, AgentError, AgentEvent, AgentPolicy, AgentResponse, BackendError, LlmBackend, LlmParams, PlanningError,
};
use atomflow_core::clock::{Clock, SystemClock};
use atomflow_core::toolkit::Registry;

use crate::bucket::Acquire;
use crate::cache::{cache_key, ResponseCache};
use crate::config::GatewayConfig;
use crate::error::ApiError;
use crate::jobs::{JobFuture, JobQueue, JobRunner};
use crate::keys::{KeyError, KeyStore};
use crate::openapi;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Published tool routes and the registry tool each one invokes.
pub const TOOL_ROUTES: [(&str, &str); 6] = [
    ("/jarvis_dft/query", "jarvis_dft_query"),
    ("/alignn/query", "predict_properties"),
    ("/alignn_ff/query", "relax_structure"),
    ("/generate_interface", "generate_interface"),
    ("/pxrd/query", "simulate_pxrd"),
    ("/slakonet/bandstructure", "bandstructure_stub"),
];

pub const CHAT_ROUTE: &str = "/agent/chat";

/// Identity of the key that passed authentication, for handlers and logs.
#[derive(Debug, Clone)]
pub struct Caller(pub String);

pub struct AppState {
    pub config: GatewayConfig,
    pub registry: Arc<Registry>,
    pub keys: KeyStore,
    pub cache: ResponseCache,
    pub backend: Option<Arc<dyn LlmBackend>>,
    pub agent_policy: AgentPolicy,
    started: Instant,
    tool_invocations: AtomicU64,
    jobs: OnceLock<Arc<JobQueue>>,
}

impl AppState {
    /// Tool handler executions, excluding cache hits.
    pub fn tool_invocations(&self) -> u64 {
        self.tool_invocations.load(Ordering::SeqCst)
    }

    pub fn jobs(&self) -> &Arc<JobQueue> {
        self.jobs.get().expect("job queue is started with the state")
    }

    fn now_secs(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn params(&self, temperature: f64) -> LlmParams {
        LlmParams { model: self.config.llm.model.clone(), temperature, ..LlmParams::default() }
    }
}

/// Builds the shared state and starts the job workers. Must be called from
/// within a Tokio runtime.
pub fn build_state(
    config: GatewayConfig,
    registry: Arc<Registry>,
    backend: Option<Arc<dyn LlmBackend>>,
    clock: Arc<dyn Clock>,
) -> Result<Arc<AppState>, KeyError> {
    let keys = KeyStore::new(&config.keys, config.bucket, 0.0)?;
    let mut agent_policy = AgentPolicy::default();
    agent_policy.exec.clock = Arc::clone(&clock);
    let state = Arc::new(AppState {
        cache: ResponseCache::new(config.cache_capacity),
        keys,
        registry,
        backend,
        agent_policy,
        started: Instant::now(),
        tool_invocations: AtomicU64::new(0),
        jobs: OnceLock::new(),
        config,
    });
    let weak: Weak<AppState> = Arc::downgrade(&state);
    let runner: JobRunner = Arc::new(move |endpoint: String, body: Value| {
        let weak = weak.clone();
        Box::pin(async move {
            let state = weak.upgrade().ok_or_else(|| "gateway is shutting down".to_string())?;
            let bytes = dispatch(&state, &endpoint, body).await.map_err(|e| format!("{}: {}", e.body.code, e.body.message))?;
            serde_json::from_slice(&bytes.0).map_err(|e| e.to_string())
        }) as JobFuture
    });
    let ttl = Duration::from_secs(state.config.job_ttl_secs);
    let queue = JobQueue::start(state.config.workers, ttl, clock, runner);
    let _ = state.jobs.set(queue);
    Ok(state)
}

/// Backend chosen by configuration: a remote server when a URL is set,
/// otherwise recorded fixtures, otherwise none.
pub fn backend_from_config(config: &GatewayConfig) -> Result<Option<Arc<dyn LlmBackend>>, BackendError> {
    use atomflow_core::agent::{RemoteBackend, ScriptedBackend};
    let llm = &config.llm;
    if let Some(url) = &llm.base_url {
        let mut b = RemoteBackend::new(url.clone()).with_timeout(Duration::from_secs(llm.timeout_secs));
        if let Some(k) = &llm.api_key {
            b = b.with_api_key(k.clone());
        }
        return Ok(Some(Arc::new(b)));
    }
    match &llm.fixtures {
        Some(path) => Ok(Some(Arc::new(ScriptedBackend::from_file(path)?))),
        None => Ok(None),
    }
}

/// Convenience for tests and embedding: state over the system clock.
pub fn app(
    config: GatewayConfig,
    registry: Arc<Registry>,
    backend: Option<Arc<dyn LlmBackend>>,
) -> Result<(Router, Arc<AppState>), KeyError> {
    let state = build_state(config, registry, backend, Arc::new(SystemClock))?;
    Ok((router(Arc::clone(&state)), state))
}

pub fn router(state: Arc<AppState>) -> Router {
    let mut protected = Router::new()
        .route("/tools/{name}", post(generic_tool))
        .route(CHAT_ROUTE, post(agent_chat))
        .route("/jobs", post(submit_job))
        .route("/jobs/{id}", get(poll_job));
    for (path, tool) in TOOL_ROUTES {
        protected = protected.route(
            path,
            post(move |s: State<Arc<AppState>>, q: RawQuery, body: Bytes| tool_endpoint(s, tool, q, body)),
        );
    }
    let protected = protected.route_layer(middleware::from_fn_with_state(Arc::clone(&state), authenticate));
    Router::new()
        .route("/health", get(health))
        .route("/openapi.json", get(openapi_doc))
        .merge(protected)
        .fallback(no_route)
        .method_not_allowed_fallback(wrong_method)
        .with_state(state)
}

async fn no_route() -> ApiError {
    ApiError::not_found("no_route", "no such route").with_hint("GET /openapi.json lists every route")
}

async fn wrong_method() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this route")
}

fn presented_secret(headers: &HeaderMap) -> Option<&str> {
    let bearer = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim);
    bearer.or_else(|| headers.get("x-api-key").and_then(|v| v.to_str().ok()).map(str::trim))
}

/// Authentication first, then the caller's token bucket.
async fn authenticate(State(state): State<Arc<AppState>>, mut req: Request, next: Next) -> Response {
    let Some(secret) = presented_secret(req.headers()) else {
        return ApiError::unauthorized("missing API key").into_response();
    };
    let Some(record) = state.keys.authenticate(secret) else {
        return ApiError::unauthorized("unknown or disabled API key").into_response();
    };
    if let Acquire::Denied { retry_after } = record.acquire(state.now_secs()) {
        tracing::debug!(key = %record.key_id, retry_after, "rate limited");
        return ApiError::rate_limited((retry_after.ceil() as u64).max(1)).into_response();
    }
    req.extensions_mut().insert(Caller(record.key_id.clone()));
    next.run(req).await
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok", "version": VERSION}))
}

async fn openapi_doc(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(openapi::document(&state.registry))
}

/// Serialized JSON plus whether it came from the cache.
pub struct Payload(pub Bytes, pub Option<bool>);

impl IntoResponse for Payload {
    fn into_response(self) -> Response {
        let mut resp = ([(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], self.0).into_response();
        if let Some(hit) = self.1 {
            resp.headers_mut().insert("cache", HeaderValue::from_static(if hit { "hit" } else { "miss" }));
        }
        resp
    }
}

fn parse_object(body: &Bytes) -> Result<Value, ApiError> {
    let v: Value = serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request("invalid_json", format!("request body is not valid JSON: {e}")))?;
    if !v.is_object() {
        return Err(ApiError::bad_request("invalid_json", "request body must be a JSON object"));
    }
    Ok(v)
}

fn is_async(query: &Option<String>) -> Result<bool, ApiError> {
    let Some(q) = query else { return Ok(false) };
    for pair in q.split('&') {
        match pair.split_once('=') {
            Some(("mode", "async")) => return Ok(true),
            Some(("mode", "sync")) => return Ok(false),
            Some(("mode", other)) => {
                return Err(ApiError::bad_request("invalid_mode", format!("unknown mode '{other}'"))
                    .with_hint("use mode=sync or mode=async"))
            }
            _ => {}
        }
    }
    Ok(false)
}

fn accepted(state: &AppState, endpoint: &str, body: Value) -> Response {
    let job_id = state.jobs().submit(endpoint, body);
    let poll = format!("/jobs/{job_id}");
    (StatusCode::ACCEPTED, Json(json!({"job_id": job_id, "state": "queued", "poll": poll}))).into_response()
}

async fn tool_endpoint(State(state): State<Arc<AppState>>, tool: &'static str, q: RawQuery, body: Bytes) -> Response {
    tool_request(&state, tool, &q.0, &body).await.unwrap_or_else(IntoResponse::into_response)
}

async fn generic_tool(State(state): State<Arc<AppState>>, Path(name): Path<String>, q: RawQuery, body: Bytes) -> Response {
    tool_request(&state, &name, &q.0, &body).await.unwrap_or_else(IntoResponse::into_response)
}

async fn tool_request(state: &Arc<AppState>, tool: &str, query: &Option<String>, body: &Bytes) -> Result<Response, ApiError> {
    let body = parse_object(body)?;
    if is_async(query)? {
        // reject bad bodies before a job exists
        state.registry.check_arguments(tool, &body, false)?;
        return Ok(accepted(state, &format!("/tools/{tool}"), body));
    }
    Ok(call_tool(state, tool, body).await?.into_response())
}

/// Runs a tool through the cache. Identical canonical bodies return
/// identical bytes.
pub async fn call_tool(state: &Arc<AppState>, tool: &str, body: Value) -> Result<Payload, ApiError> {
    let key = cache_key(tool, &body);
    if let Some(bytes) = state.cache.get(&key) {
        return Ok(Payload(bytes, Some(true)));
    }
    let st = Arc::clone(state);
    let name = tool.to_string();
    let result = tokio::task::spawn_blocking(move || {
        st.tool_invocations.fetch_add(1, Ordering::SeqCst);
        st.registry.invoke(&name, &body)
    })
    .await
    .map_err(|e| ApiError::internal(format!("tool task failed: {e}")))??;
    let bytes = Bytes::from(serde_json::to_vec(&result).map_err(|e| ApiError::internal(e.to_string()))?);
    state.cache.put(key, bytes.clone());
    Ok(Payload(bytes, Some(false)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatRequest {
    query: String,
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    temperature: Option<f64>,
    #[serde(default)]
    stream: Option<bool>,
}

fn validate_chat(state: &AppState, body: Value) -> Result<(ChatRequest, LlmParams), ApiError> {
    let req: ChatRequest = serde_json::from_value(body)
        .map_err(|e| ApiError::bad_request("schema_violation", e.to_string()).with_hint("expected {query, model?, temperature?, stream?}"))?;
    if req.query.trim().is_empty() {
        return Err(ApiError::bad_request("schema_violation", "query must not be empty"));
    }
    let pinned = &state.config.llm.model;
    if let Some(m) = req.model.as_deref().filter(|m| m != pinned) {
        return Err(ApiError::bad_request("model_not_pinned", format!("model '{m}' is not served here"))
            .with_hint(format!("this gateway is pinned to '{pinned}'")));
    }
    let temperature = req.temperature.unwrap_or(0.0);
    if !(0.0..=2.0).contains(&temperature) {
        return Err(ApiError::bad_request("schema_violation", "temperature must be between 0 and 2"));
    }
    let params = state.params(temperature);
    Ok((req, params))
}

fn agent_error(e: AgentError) -> ApiError {
    match e {
        AgentError::Planning(PlanningError::EmptyRegistry) => ApiError::internal("no tools are registered"),
        AgentError::Planning(PlanningError::PlanningFailed { attempts, last_error }) => {
            ApiError::new(StatusCode::BAD_GATEWAY, "planning_failed", format!("no valid plan after {attempts} attempts"))
                .with_hint(last_error.to_string())
        }
        AgentError::Planning(PlanningError::Backend(b)) | AgentError::Summarize(b) => backend_error(b),
    }
}

fn backend_error(e: BackendError) -> ApiError {
    match e {
        BackendError::Timeout(_) => ApiError::new(StatusCode::GATEWAY_TIMEOUT, "llm_timeout", e.to_string()),
        BackendError::UnknownFixture { .. } => ApiError::new(StatusCode::BAD_GATEWAY, "no_fixture", e.to_string())
            .with_hint("this gateway replays recorded conversations; only recorded queries are answered"),
        other => ApiError::new(StatusCode::BAD_GATEWAY, "llm_error", other.to_string()),
    }
}

fn backend(state: &AppState) -> Result<Arc<dyn LlmBackend>, ApiError> {
    state.backend.clone().ok_or_else(|| {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "llm_unavailable", "no language model is configured")
            .with_hint("set llm.base_url or llm.fixtures in the gateway config")
    })
}

/// Non-streaming chat. Responses at temperature 0 are cached.
pub async fn call_chat(state: &Arc<AppState>, body: Value) -> Result<Payload, ApiError> {
    let (req, params) = validate_chat(state, body)?;
    let cacheable = params.temperature == 0.0;
    let key = cache_key(CHAT_ROUTE, &json!({"query": req.query, "model": params.model, "temperature": params.temperature}));
    if cacheable {
        if let Some(bytes) = state.cache.get(&key) {
            return Ok(Payload(bytes, Some(true)));
        }
    }
    let backend = backend(state)?;
    let response = run_agent(&req.query, Arc::clone(&state.registry), backend.as_ref(), &params, &state.agent_policy, None)
        .await
        .map_err(agent_error)?;
    let bytes = Bytes::from(serde_json::to_vec(&response).map_err(|e| ApiError::internal(e.to_string()))?);
    if !cacheable {
        return Ok(Payload(bytes, None));
    }
    state.cache.put(key, bytes.clone());
    Ok(Payload(bytes, Some(false)))
}

fn accepts_event_stream(headers: &HeaderMap) -> bool {
    headers.get(header::ACCEPT).and_then(|v| v.to_str().ok()).is_some_and(|a| a.contains("text/event-stream"))
}

async fn agent_chat(State(state): State<Arc<AppState>>, headers: HeaderMap, q: RawQuery, body: Bytes) -> Response {
    let run = async {
        let body = parse_object(&body)?;
        let asynchronous = is_async(&q.0)?;
        let (req, params) = validate_chat(&state, body.clone())?;
        if asynchronous {
            return Ok(accepted(&state, CHAT_ROUTE, body));
        }
        if req.stream.unwrap_or_else(|| accepts_event_stream(&headers)) {
            return Ok(stream_chat(state.clone(), backend(&state)?, req.query, params).into_response());
        }
        Ok::<_, ApiError>(call_chat(&state, body).await?.into_response())
    };
    run.await.unwrap_or_else(IntoResponse::into_response)
}

/// Wire frame for one agent event.
pub fn frame(event: &AgentEvent) -> Value {
    match event {
        AgentEvent::Plan { plan } => json!({"type": "plan", "plan": plan}),
        AgentEvent::StepStarted { step_id, tool } => {
            json!({"type": "step", "phase": "started", "step_id": step_id, "tool": tool})
        }
        AgentEvent::StepFinished { record } => json!({
            "type": "step", "phase": "finished", "step_id": record.step_id, "tool": record.tool, "record": record
        }),
        AgentEvent::Token { text } => json!({"type": "token", "text": text}),
        AgentEvent::Final { response } => json!({"type": "final", "response": response}),
    }
}

fn sse_event(v: &Value) -> Event {
    let kind = v["type"].as_str().unwrap_or("message").to_string();
    Event::default().event(kind).data(v.to_string())
}

fn stream_chat(
    state: Arc<AppState>,
    backend: Arc<dyn LlmBackend>,
    query: String,
    params: LlmParams,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let (tx, rx) = mpsc::unbounded_channel::<AgentEvent>();
    let (done_tx, done_rx) = tokio::sync::oneshot::channel::<Result<AgentResponse, AgentError>>();
    tokio::spawn(async move {
        let r = run_agent(&query, Arc::clone(&state.registry), backend.as_ref(), &params, &state.agent_policy, Some(&tx)).await;
        drop(tx);
        let _ = done_tx.send(r);
    });
    let events = stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|e| (Ok(sse_event(&frame(&e))), rx)) });
    // a failed run ends the stream with one error frame
    let tail = stream::once(async move {
        match done_rx.await {
            Ok(Err(e)) => {
                let b = agent_error(e).body;
                Some(Ok(sse_event(&json!({"type": "error", "code": b.code, "message": b.message, "hint": b.hint}))))
            }
            _ => None,
        }
    });
    use futures::StreamExt;
    Sse::new(events.chain(tail.filter_map(|x| async move { x }))).keep_alive(KeepAlive::default())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobRequest {
    endpoint: String,
    #[serde(default = "empty_object")]
    body: Value,
}

fn empty_object() -> Value {
    json!({})
}

enum Target {
    Tool(String),
    Chat,
}

fn resolve_endpoint(registry: &Registry, endpoint: &str) -> Option<Target> {
    let path = format!("/{}", endpoint.trim_start_matches('/'));
    if path == CHAT_ROUTE {
        return Some(Target::Chat);
    }
    if let Some((_, tool)) = TOOL_ROUTES.iter().find(|(p, _)| *p == path) {
        return Some(Target::Tool(tool.to_string()));
    }
    let name = path.strip_prefix("/tools/").unwrap_or(&path[1..]);
    registry.get(name).map(|d| Target::Tool(d.name.clone()))
}

/// Executes a request addressed by endpoint, as a job worker does.
pub async fn dispatch(state: &Arc<AppState>, endpoint: &str, body: Value) -> Result<Payload, ApiError> {
    match resolve_endpoint(&state.registry, endpoint) {
        Some(Target::Tool(t)) => call_tool(state, &t, body).await,
        Some(Target::Chat) => call_chat(state, body).await,
        None => Err(unknown_endpoint(endpoint)),
    }
}

fn unknown_endpoint(endpoint: &str) -> ApiError {
    let known: Vec<&str> = TOOL_ROUTES.iter().map(|(p, _)| *p).chain([CHAT_ROUTE, "/tools/{name}"]).collect();
    ApiError::not_found("unknown_endpoint", format!("no endpoint '{endpoint}'"))
        .with_hint(format!("jobs accept {}", known.join(", ")))
}

async fn submit_job(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let run = || {
        let req: JobRequest = serde_json::from_value(parse_object(&body)?)
            .map_err(|e| ApiError::bad_request("schema_violation", e.to_string()).with_hint("expected {endpoint, body}"))?;
        if !req.body.is_object() {
            return Err(ApiError::bad_request("schema_violation", "body must be a JSON object"));
        }
        match resolve_endpoint(&state.registry, &req.endpoint) {
            Some(Target::Tool(t)) => {
                state.registry.check_arguments(&t, &req.body, false)?;
                Ok(accepted(&state, &format!("/tools/{t}"), req.body))
            }
            Some(Target::Chat) => {
                validate_chat(&state, req.body.clone())?;
                Ok(accepted(&state, CHAT_ROUTE, req.body))
            }
            None => Err(unknown_endpoint(&req.endpoint)),
        }
    };
    run().unwrap_or_else(IntoResponse::into_response)
}

async fn poll_job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.jobs().get(&id) {
        Some(rec) => Json(rec).into_response(),
        None => ApiError::not_found("unknown_job", format!("no job '{id}'"))
            .with_hint(format!(
                "finished jobs are kept for {} s and then purged",
                state.jobs().ttl().as_secs()
            ))
            .into_response(),
    }
}

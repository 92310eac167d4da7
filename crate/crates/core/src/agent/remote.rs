//! Chat-completions HTTP client with optional event-stream responses.

use std::time::{Duration, Instant};

use async_trait::async_trait;
use futures::StreamExt;
use serde_json::{json, Value};

use super::backend::{estimate_prompt_tokens, BackendError, DeltaSink, LlmBackend};
use super::messages::{ChatMessage, ChatResponse, LlmParams, Role, Usage};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone)]
pub struct RemoteBackend {
    client: reqwest::Client,
    base_url: String,
    api_key: Option<String>,
    timeout: Duration,
}

impl RemoteBackend {
    /// `base_url` is the API root, e.g. `http://localhost:8000/v1`.
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            client: reqwest::Client::new(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: None,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }

    fn body(&self, messages: &[ChatMessage], params: &LlmParams, stream: bool) -> Value {
        let wire: Vec<Value> = messages.iter().map(wire_message).collect();
        let mut body = json!({
            "model": params.model,
            "messages": wire,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "stream": stream,
        });
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    async fn send(&self, body: &Value) -> Result<reqwest::Response, BackendError> {
        let mut req = self.client.post(self.endpoint()).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().await.unwrap_or_default();
            return Err(BackendError::Http { status: status.as_u16(), body });
        }
        Ok(resp)
    }

    async fn complete(&self, messages: &[ChatMessage], params: &LlmParams) -> Result<ChatResponse, BackendError> {
        let start = Instant::now();
        let resp = self.send(&self.body(messages, params, false)).await?;
        let v: Value = resp.json().await.map_err(|e| BackendError::Protocol(e.to_string()))?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| BackendError::Protocol("response has no choices[0].message.content".into()))?
            .to_string();
        let usage = Usage {
            prompt_tokens: v["usage"]["prompt_tokens"].as_u64().map(|n| n as u32).unwrap_or_else(|| estimate_prompt_tokens(messages)),
            completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0) as u32,
        };
        Ok(ChatResponse { text, usage, latency: start.elapsed() })
    }

    async fn stream(
        &self,
        messages: &[ChatMessage],
        params: &LlmParams,
        sink: DeltaSink<'_>,
    ) -> Result<ChatResponse, BackendError> {
        let start = Instant::now();
        let resp = self.send(&self.body(messages, params, true)).await?;
        let mut bytes = resp.bytes_stream();
        let mut parser = SseParser::default();
        let mut text = String::new();
        let mut deltas = 0u32;
        let mut done = false;
        while let Some(chunk) = bytes.next().await {
            let chunk = chunk.map_err(|e| BackendError::Transport(e.to_string()))?;
            for event in parser.push(&chunk) {
                match event {
                    SseEvent::Done => done = true,
                    SseEvent::Data(payload) => {
                        if let Some(d) = delta_content(&payload)? {
                            deltas += 1;
                            sink(&d);
                            text.push_str(&d);
                        }
                    }
                }
            }
            if done {
                break;
            }
        }
        if !done {
            for event in parser.finish() {
                if let SseEvent::Data(payload) = event {
                    if let Some(d) = delta_content(&payload)? {
                        deltas += 1;
                        sink(&d);
                        text.push_str(&d);
                    }
                }
            }
        }
        let usage = Usage { prompt_tokens: estimate_prompt_tokens(messages), completion_tokens: deltas };
        Ok(ChatResponse { text, usage, latency: start.elapsed() })
    }
}

/// The wire format has no structured tool role here; tool results travel as
/// user turns so any compatible server accepts them.
fn wire_message(m: &ChatMessage) -> Value {
    match m.role {
        Role::Tool => {
            let tool = m.tool_result.as_ref().map(|r| r.tool.as_str()).unwrap_or("tool");
            json!({"role": "user", "content": format!("Tool result from {tool}:\n{}", m.content)})
        }
        role => json!({"role": role.as_str(), "content": m.content}),
    }
}

/// Content of `choices[0].delta`, or `None` for role-only or empty chunks.
fn delta_content(payload: &str) -> Result<Option<String>, BackendError> {
    let v: Value =
        serde_json::from_str(payload).map_err(|e| BackendError::Protocol(format!("bad stream chunk: {e}")))?;
    if let Some(err) = v.get("error") {
        return Err(BackendError::Protocol(format!("stream error: {err}")));
    }
    Ok(v["choices"][0]["delta"]["content"].as_str().filter(|s| !s.is_empty()).map(str::to_string))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SseEvent {
    Data(String),
    Done,
}

/// Incremental event-stream decoder. Bytes are buffered until a full line
/// arrives, so chunk boundaries may fall anywhere, including inside a
/// multi-byte character.
#[derive(Debug, Default)]
pub struct SseParser {
    buf: Vec<u8>,
    data: Vec<String>,
}

impl SseParser {
    pub fn push(&mut self, chunk: &[u8]) -> Vec<SseEvent> {
        self.buf.extend_from_slice(chunk);
        let mut out = Vec::new();
        while let Some(pos) = self.buf.iter().position(|&b| b == b'\n') {
            let raw: Vec<u8> = self.buf.drain(..=pos).collect();
            let line = String::from_utf8_lossy(&raw[..raw.len() - 1]);
            self.line(line.trim_end_matches('\r'), &mut out);
        }
        out
    }

    /// Flushes a trailing event that was not followed by a blank line.
    pub fn finish(&mut self) -> Vec<SseEvent> {
        let mut out = Vec::new();
        if !self.buf.is_empty() {
            let rest = String::from_utf8_lossy(&std::mem::take(&mut self.buf)).into_owned();
            self.line(rest.trim_end_matches('\r'), &mut out);
        }
        self.dispatch(&mut out);
        out
    }

    fn line(&mut self, line: &str, out: &mut Vec<SseEvent>) {
        if line.is_empty() {
            self.dispatch(out);
        } else if let Some(rest) = line.strip_prefix("data:") {
            self.data.push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
        }
        // comments (":") and other fields carry nothing we use
    }

    fn dispatch(&mut self, out: &mut Vec<SseEvent>) {
        if self.data.is_empty() {
            return;
        }
        let payload = std::mem::take(&mut self.data).join("\n");
        if payload.trim() == "[DONE]" {
            out.push(SseEvent::Done);
        } else {
            out.push(SseEvent::Data(payload));
        }
    }
}

#[async_trait]
impl LlmBackend for RemoteBackend {
    async fn chat(&self, messages: &[ChatMessage], params: &LlmParams) -> Result<ChatResponse, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::EmptyMessages);
        }
        tokio::time::timeout(self.timeout, self.complete(messages, params))
            .await
            .map_err(|_| BackendError::Timeout(self.timeout))?
    }

    async fn chat_stream(
        &self,
        messages: &[ChatMessage],
        params: &LlmParams,
        sink: DeltaSink<'_>,
    ) -> Result<ChatResponse, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::EmptyMessages);
        }
        tokio::time::timeout(self.timeout, self.stream(messages, params, sink))
            .await
            .map_err(|_| BackendError::Timeout(self.timeout))?
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parser_handles_split_chunks() {
        let wire = "data: {\"a\":1}\n\n: keepalive\n\ndata: {\"b\":\"\u{00e9}\"}\r\n\r\ndata: [DONE]\n\n";
        let bytes = wire.as_bytes();
        for cut in 0..bytes.len() {
            let mut p = SseParser::default();
            let mut ev = p.push(&bytes[..cut]);
            ev.extend(p.push(&bytes[cut..]));
            ev.extend(p.finish());
            assert_eq!(
                ev,
                vec![
                    SseEvent::Data("{\"a\":1}".into()),
                    SseEvent::Data("{\"b\":\"\u{00e9}\"}".into()),
                    SseEvent::Done
                ],
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn tool_messages_go_out_as_user_turns() {
        let call = crate::toolkit::ToolCall::new("get_structure", json!({"jid": "x"}));
        let w = wire_message(&ChatMessage::tool(&call, json!({"poscar": "p"})));
        assert_eq!(w["role"], "user");
        assert!(w["content"].as_str().unwrap().starts_with("Tool result from get_structure"));
    }

    #[test]
    fn delta_content_skips_role_chunks() {
        assert_eq!(delta_content(r#"{"choices":[{"delta":{"role":"assistant"}}]}"#).unwrap(), None);
        assert_eq!(delta_content(r#"{"choices":[{"delta":{"content":"hi"}}]}"#).unwrap(), Some("hi".into()));
        assert!(delta_content("not json").is_err());
    }
}

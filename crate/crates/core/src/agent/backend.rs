use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::messages::{ChatMessage, ChatResponse, LlmParams, Usage};
use crate::canonical::canonical_json;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("no messages to send")]
    EmptyMessages,
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("server returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("no scripted response for message sequence {key}")]
    UnknownFixture { key: String },
}

impl BackendError {
    /// Timeouts, transport failures, 429 and 5xx may succeed on retry.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Timeout(_) | BackendError::Transport(_) => true,
            BackendError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Receives each streamed text delta as it arrives.
pub type DeltaSink<'a> = &'a mut (dyn FnMut(&str) + Send);

#[async_trait]
pub trait LlmBackend: Send + Sync {
    async fn chat(&self, messages: &[ChatMessage], params: &LlmParams) -> Result<ChatResponse, BackendError>;

    /// Streams deltas into `sink`; the returned text is their concatenation.
    /// Backends without native streaming deliver the whole text as one delta.
    async fn chat_stream(
        &self,
        messages: &[ChatMessage],
        params: &LlmParams,
        sink: DeltaSink<'_>,
    ) -> Result<ChatResponse, BackendError> {
        let r = self.chat(messages, params).await?;
        sink(&r.text);
        Ok(r)
    }
}

/// SHA-256 hex of the canonical JSON array of messages, so the key depends
/// only on message content.
pub fn fixture_key(messages: &[ChatMessage]) -> String {
    let items: Vec<Value> = messages.iter().map(|m| serde_json::to_value(m).unwrap_or(Value::Null)).collect();
    let text = canonical_json(&Value::Array(items));
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Splits text into word pieces, each carrying its leading whitespace, so the
/// pieces concatenate back to the input.
pub fn token_pieces(text: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut seen_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if seen_word {
                pieces.push(&text[start..i]);
                start = i;
                seen_word = false;
            }
        } else {
            seen_word = true;
        }
    }
    if start < text.len() {
        pieces.push(&text[start..]);
    }
    pieces
}

pub(crate) fn estimate_prompt_tokens(messages: &[ChatMessage]) -> u32 {
    messages.iter().map(|m| m.estimated_tokens()).sum::<usize>() as u32
}

/// Replays canned responses keyed by [`fixture_key`]. Unknown sequences are
/// an error, so every exchange a test depends on must be pinned.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    fixtures: BTreeMap<String, String>,
    token_delay: Duration,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_map(fixtures: BTreeMap<String, String>) -> Self {
        Self { fixtures, token_delay: Duration::ZERO }
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let map: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| BackendError::Protocol(format!("fixture file: {e}")))?;
        Ok(Self::from_map(map))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| BackendError::Transport(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    /// Pause between streamed pieces, for throughput measurements.
    pub fn with_token_delay(mut self, delay: Duration) -> Self {
        self.token_delay = delay;
        self
    }

    pub fn insert(&mut self, messages: &[ChatMessage], response: impl Into<String>) {
        self.fixtures.insert(fixture_key(messages), response.into());
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }

    fn lookup(&self, messages: &[ChatMessage]) -> Result<&str, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::EmptyMessages);
        }
        let key = fixture_key(messages);
        self.fixtures.get(&key).map(String::as_str).ok_or(BackendError::UnknownFixture { key })
    }
}

#[async_trait]
impl LlmBackend for ScriptedBackend {
    async fn chat(&self, messages: &[ChatMessage], _params: &LlmParams) -> Result<ChatResponse, BackendError> {
        let start = Instant::now();
        let text = self.lookup(messages)?.to_string();
        let usage = Usage {
            prompt_tokens: estimate_prompt_tokens(messages),
            completion_tokens: token_pieces(&text).len() as u32,
        };
        Ok(ChatResponse { text, usage, latency: start.elapsed() })
    }

    async fn chat_stream(
        &self,
        messages: &[ChatMessage],
        _params: &LlmParams,
        sink: DeltaSink<'_>,
    ) -> Result<ChatResponse, BackendError> {
        let start = Instant::now();
        let text = self.lookup(messages)?.to_string();
        let pieces = token_pieces(&text);
        for (i, piece) in pieces.iter().enumerate() {
            if i > 0 && !self.token_delay.is_zero() {
                tokio::time::sleep(self.token_delay).await;
            }
            sink(piece);
        }
        let usage = Usage { prompt_tokens: estimate_prompt_tokens(messages), completion_tokens: pieces.len() as u32 };
        Ok(ChatResponse { text, usage, latency: start.elapsed() })
    }
}

/// Forwards to an inner backend and keeps every exchange as a fixture entry.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<BTreeMap<String, String>>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, recorded: Mutex::new(BTreeMap::new()) }
    }

    pub fn fixtures(&self) -> BTreeMap<String, String> {
        self.recorded.lock().map(|m| m.clone()).unwrap_or_default()
    }

    fn record(&self, messages: &[ChatMessage], text: &str) {
        if let Ok(mut m) = self.recorded.lock() {
            m.insert(fixture_key(messages), text.to_string());
        }
    }
}

#[async_trait]
impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    async fn chat(&self, messages: &[ChatMessage], params: &LlmParams) -> Result<ChatResponse, BackendError> {
        let r = self.inner.chat(messages, params).await?;
        self.record(messages, &r.text);
        Ok(r)
    }

    async fn chat_stream(
        &self,
        messages: &[ChatMessage],
        params: &LlmParams,
        sink: DeltaSink<'_>,
    ) -> Result<ChatResponse, BackendError> {
        let r = self.inner.chat_stream(messages, params, sink).await?;
        self.record(messages, &r.text);
        Ok(r)
    }
}

/// Answers through a closure; handy for authoring fixtures and for tests
/// that need to inspect what was sent.
pub struct FnBackend<F>(pub F);

#[async_trait]
impl<F> LlmBackend for FnBackend<F>
where
    F: Fn(&[ChatMessage]) -> Result<String, BackendError> + Send + Sync,
{
    async fn chat(&self, messages: &[ChatMessage], _params: &LlmParams) -> Result<ChatResponse, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::EmptyMessages);
        }
        let start = Instant::now();
        let text = (self.0)(messages)?;
        let usage = Usage {
            prompt_tokens: estimate_prompt_tokens(messages),
            completion_tokens: token_pieces(&text).len() as u32,
        };
        Ok(ChatResponse { text, usage, latency: start.elapsed() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt() -> tokio::runtime::Runtime {
        tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap()
    }

    #[test]
    fn pieces_reassemble() {
        for t in ["", "one", "  lead and  trail  ", "a\nb\tc", "{\"tool\": \"x\"}"] {
            assert_eq!(token_pieces(t).concat(), t);
        }
        assert_eq!(token_pieces("The answer is 42"), vec!["The", " answer", " is", " 42"]);
    }

    #[test]
    fn keys_depend_on_content_only() {
        let a = vec![ChatMessage::system("s"), ChatMessage::user("q")];
        let b = vec![ChatMessage::system("s"), ChatMessage::user("q")];
        let c = vec![ChatMessage::system("s"), ChatMessage::user("q2")];
        assert_eq!(fixture_key(&a), fixture_key(&b));
        assert_ne!(fixture_key(&a), fixture_key(&c));
        assert_eq!(fixture_key(&a).len(), 64);
    }

    #[test]
    fn scripted_replays_and_rejects_unknown() {
        let msgs = vec![ChatMessage::user("hello")];
        let mut b = ScriptedBackend::new();
        b.insert(&msgs, "{\"final_answer\": \"hi\"}");
        let p = LlmParams::default();
        let r = rt().block_on(b.chat(&msgs, &p)).unwrap();
        assert_eq!(r.text, "{\"final_answer\": \"hi\"}");
        assert_eq!(r.usage.completion_tokens, 2);
        let err = rt().block_on(b.chat(&[ChatMessage::user("other")], &p)).unwrap_err();
        assert!(matches!(err, BackendError::UnknownFixture { .. }));
    }

    #[test]
    fn scripted_stream_matches_chat() {
        let msgs = vec![ChatMessage::user("count")];
        let mut b = ScriptedBackend::new();
        b.insert(&msgs, "one two three four");
        let mut got = Vec::new();
        let r = rt()
            .block_on(b.chat_stream(&msgs, &LlmParams::default(), &mut |d: &str| got.push(d.to_string())))
            .unwrap();
        assert_eq!(got.concat(), r.text);
        assert_eq!(r.usage.completion_tokens as usize, got.len());
    }

    #[test]
    fn recording_captures_exchanges() {
        let inner = FnBackend(|m: &[ChatMessage]| Ok(format!("echo {}", m.last().unwrap().content)));
        let rec = RecordingBackend::new(inner);
        let msgs = vec![ChatMessage::user("x")];
        rt().block_on(rec.chat(&msgs, &LlmParams::default())).unwrap();
        let replay = ScriptedBackend::from_map(rec.fixtures());
        assert_eq!(rt().block_on(replay.chat(&msgs, &LlmParams::default())).unwrap().text, "echo x");
    }
}

//! Chat-completion clients.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};
use thiserror::Error;

use super::{GenerationParams, SynthError};
use crate::chat_template::Turn;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ClientError {
    /// Worth retrying: timeouts, rate limits, server errors.
    #[error("transient client error: {0}")]
    Transient(String),
    /// Not worth retrying; aborts a generation job.
    #[error("fatal client error: {0}")]
    Fatal(String),
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, messages: &[Turn], params: &GenerationParams) -> Result<String, ClientError>;
}

impl<C: ChatClient + ?Sized> ChatClient for &C {
    fn complete(&self, messages: &[Turn], params: &GenerationParams) -> Result<String, ClientError> {
        (**self).complete(messages, params)
    }
}

/// Stable hex digest of a message list (roles and contents).
pub fn messages_digest(messages: &[Turn]) -> String {
    let mut h = Sha1::new();
    for t in messages {
        h.update(t.role.to_string().as_bytes());
        h.update([0u8]);
        h.update(t.content.as_bytes());
        h.update([0x1eu8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Deterministic transcript player.
///
/// Replies are looked up by [`messages_digest`]; unknown inputs get a
/// synthetic reply derived from the digest and the sampling seed.
#[derive(Debug, Default)]
pub struct MockClient {
    replies: HashMap<String, String>,
    calls: AtomicUsize,
}

#[derive(Debug, Deserialize)]
struct TranscriptEntry {
    messages: Vec<Turn>,
    reply: String,
}

impl MockClient {
    pub fn new() -> Self {
        MockClient::default()
    }

    pub fn with_reply(mut self, messages: &[Turn], reply: impl Into<String>) -> Self {
        self.replies.insert(messages_digest(messages), reply.into());
        self
    }

    /// Loads `{"messages": [...], "reply": "..."}` lines.
    pub fn from_transcript(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::io(path, e))?;
        let mut client = MockClient::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let entry: TranscriptEntry = serde_json::from_str(line).map_err(|e| SynthError::Parse {
                offset: i + 1,
                message: format!("transcript line {}: {e}", i + 1),
            })?;
            client = client.with_reply(&entry.messages, entry.reply);
        }
        Ok(client)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn fallback_reply(messages: &[Turn], params: &GenerationParams) -> String {
        let digest = messages_digest(messages);
        match params.seed {
            Some(seed) => format!("balasan {} benih {seed}", &digest[..12]),
            None => format!("balasan {}", &digest[..12]),
        }
    }
}

impl ChatClient for MockClient {
    fn complete(&self, messages: &[Turn], params: &GenerationParams) -> Result<String, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self
            .replies
            .get(&messages_digest(messages))
            .cloned()
            .unwrap_or_else(|| MockClient::fallback_reply(messages, params)))
    }
}

/// Adapts a closure into a client.
pub struct FnClient<F>(pub F);

impl<F> ChatClient for FnClient<F>
where
    F: Fn(&[Turn], &GenerationParams) -> Result<String, ClientError> + Send + Sync,
{
    fn complete(&self, messages: &[Turn], params: &GenerationParams) -> Result<String, ClientError> {
        (self.0)(messages, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Extra attempts after the first.
    pub retries: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 3,
            backoff_base: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            retries: 0,
            backoff_base: Duration::ZERO,
        }
    }

    /// Sleep before retry number `attempt` (0-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        self.backoff_base.saturating_mul(1u32 << attempt.min(16))
    }
}

/// Calls `client`, retrying transient failures with exponential backoff.
/// Returns the result and the number of attempts made.
pub fn complete_with_retry(
    client: &dyn ChatClient,
    messages: &[Turn],
    params: &GenerationParams,
    policy: RetryPolicy,
) -> (Result<String, ClientError>, u32) {
    let mut attempt = 0;
    loop {
        match client.complete(messages, params) {
            Err(ClientError::Transient(_)) if attempt < policy.retries => {
                std::thread::sleep(policy.backoff(attempt));
                attempt += 1;
            }
            other => return (other, attempt + 1),
        }
    }
}

#[cfg(feature = "http")]
pub use http::HttpClient;

#[cfg(feature = "http")]
mod http {
    use super::*;
    use serde_json::{json, Value};

    pub const URL_VAR: &str = "CORPUSKIT_CHAT_URL";
    pub const KEY_VAR: &str = "CORPUSKIT_CHAT_KEY";
    pub const MODEL_VAR: &str = "CORPUSKIT_CHAT_MODEL";

    /// OpenAI-compatible `/chat/completions` client.
    pub struct HttpClient {
        url: String,
        key: Option<String>,
        model: String,
        http: reqwest::blocking::Client,
    }

    impl HttpClient {
        pub fn new(url: impl Into<String>, key: Option<String>, model: impl Into<String>) -> Self {
            HttpClient {
                url: url.into(),
                key,
                model: model.into(),
                http: reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs(300))
                    .build()
                    .expect("TLS backend available"),
            }
        }

        /// Reads endpoint, key and model from the environment.
        pub fn from_env() -> Result<Self, SynthError> {
            let url = std::env::var(URL_VAR)
                .map_err(|_| SynthError::InvalidParams(format!("{URL_VAR} is not set")))?;
            let key = std::env::var(KEY_VAR).ok();
            let model = std::env::var(MODEL_VAR).unwrap_or_else(|_| "gpt-3.5-turbo".into());
            Ok(HttpClient::new(url, key, model))
        }

        fn body(&self, messages: &[Turn], params: &GenerationParams) -> Value {
            let messages: Vec<Value> = messages
                .iter()
                .map(|t| {
                    let role = match t.role {
                        crate::chat_template::Role::Context => "system".to_string(),
                        r => r.to_string(),
                    };
                    json!({"role": role, "content": t.content})
                })
                .collect();
            let mut body = json!({
                "model": self.model,
                "messages": messages,
                "top_p": params.top_p,
                "top_k": params.top_k,
                "temperature": if params.do_sample { params.temperature } else { 0.0 },
                "max_tokens": params.max_new_tokens,
                "n": 1,
            });
            if let Some(seed) = params.seed {
                body["seed"] = json!(seed);
            }
            body
        }
    }

    impl ChatClient for HttpClient {
        fn complete(&self, messages: &[Turn], params: &GenerationParams) -> Result<String, ClientError> {
            let mut req = self.http.post(&self.url).json(&self.body(messages, params));
            if let Some(key) = &self.key {
                req = req.bearer_auth(key);
            }
            let resp = req.send().map_err(|e| ClientError::Transient(e.to_string()))?;
            let status = resp.status();
            if status.as_u16() == 429 || status.is_server_error() {
                return Err(ClientError::Transient(format!("HTTP {status}")));
            }
            if !status.is_success() {
                return Err(ClientError::Fatal(format!("HTTP {status}")));
            }
            let v: Value = resp.json().map_err(|e| ClientError::Transient(e.to_string()))?;
            v.pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| ClientError::Fatal("response has no choices[0].message.content".into()))
        }
    }
}

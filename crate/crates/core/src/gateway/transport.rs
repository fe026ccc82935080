use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CallRecord, GatewayError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

/// One chat-completion request.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
    pub timeout: Duration,
}

impl ChatRequest {
    /// Text of the final user message.
    pub fn prompt(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChatResponse {
    pub content: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            ..Self::default()
        }
    }
}

/// Why a single attempt failed; decides whether it is retried.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportFailure {
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("{0}")]
    Fatal(String),
}

impl TransportFailure {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Transient(_) | Self::RateLimited { .. })
    }
}

pub trait Transport: Send + Sync {
    /// Short identity recorded in every call record.
    fn identity(&self) -> String;
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportFailure>;
}

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_API_KEY_ENV: &str = "ZINCPILOT_API_KEY";

/// Chat-completions over HTTPS with a bearer token. The token lives only in
/// memory.
pub struct LiveTransport {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for LiveTransport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LiveTransport")
            .field("endpoint", &self.endpoint)
            .finish_non_exhaustive()
    }
}

impl LiveTransport {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Result<Self, GatewayError> {
        let api_key = api_key.into();
        if api_key.trim().is_empty() {
            return Err(GatewayError::Auth("empty API key".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| GatewayError::Transport {
                message: e.to_string(),
                attempts: 0,
            })?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key,
            client,
        })
    }

    /// Reads the key from `env_var`; fails before any network traffic if it
    /// is unset or blank.
    pub fn from_env(endpoint: impl Into<String>, env_var: &str) -> Result<Self, GatewayError> {
        match std::env::var(env_var) {
            Ok(key) if !key.trim().is_empty() => Self::new(endpoint, key),
            _ => Err(GatewayError::Auth(format!("environment variable {env_var} is not set"))),
        }
    }
}

impl Transport for LiveTransport {
    fn identity(&self) -> String {
        format!("live:{}", self.endpoint)
    }

    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, TransportFailure> {
        let mut body = json!({
            "model": req.model,
            "messages": req.messages,
            "temperature": req.temperature,
        });
        if let Some(n) = req.max_tokens {
            body["max_tokens"] = json!(n);
        }
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .timeout(req.timeout)
            .json(&body)
            .send()
            .map_err(|e| TransportFailure::Transient(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<f64>().ok())
                .map(Duration::from_secs_f64);
            return Err(TransportFailure::RateLimited { retry_after });
        }
        let text = resp.text().map_err(|e| TransportFailure::Transient(e.to_string()))?;
        match status.as_u16() {
            401 | 403 => return Err(TransportFailure::Auth(format!("HTTP {status}"))),
            408 | 500..=599 => return Err(TransportFailure::Transient(format!("HTTP {status}: {text}"))),
            s if !(200..300).contains(&s) => return Err(TransportFailure::Fatal(format!("HTTP {status}: {text}"))),
            _ => {}
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| TransportFailure::Fatal(format!("malformed response: {e}")))?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| TransportFailure::Fatal("response has no choices[0].message.content".into()))?;
        Ok(ChatResponse {
            content: content.to_string(),
            prompt_tokens: v["usage"]["prompt_tokens"].as_u64(),
            completion_tokens: v["usage"]["completion_tokens"].as_u64(),
        })
    }
}

/// Serves responses recorded in a JSON-lines trace, matched by prompt text.
/// Repeated prompts are answered in recorded order.
#[derive(Debug)]
pub struct ReplayTransport {
    source: String,
    responses: Mutex<HashMap<String, VecDeque<String>>>,
}

impl ReplayTransport {
    pub fn from_records(source: impl Into<String>, records: impl IntoIterator<Item = CallRecord>) -> Self {
        let mut responses: HashMap<String, VecDeque<String>> = HashMap::new();
        for r in records {
            responses.entry(r.prompt).or_default().push_back(r.response);
        }
        Self {
            source: source.into(),
            responses: Mutex::new(responses),
        }
    }

    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let io = |e: std::io::Error| GatewayError::Trace(format!("{}: {e}", path.display()));
        let file = fs::File::open(path).map_err(io)?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CallRecord = serde_json::from_str(&line)
                .map_err(|e| GatewayError::Trace(format!("{}:{}: {e}", path.display(), i + 1)))?;
            records.push(rec);
        }
        Ok(Self::from_records(path.display().to_string(), records))
    }
}

impl Transport for ReplayTransport {
    fn identity(&self) -> String {
        format!("replay:{}", self.source)
    }

    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, TransportFailure> {
        let mut map = self.responses.lock().expect("replay lock");
        map.get_mut(req.prompt())
            .and_then(VecDeque::pop_front)
            .map(ChatResponse::text)
            .ok_or_else(|| TransportFailure::Fatal("no recorded response for this prompt".into()))
    }
}

type Responder = Box<dyn Fn(&ChatRequest) -> Result<ChatResponse, TransportFailure> + Send + Sync>;

/// Deterministic in-process transport for tests and offline runs.
pub struct MockTransport {
    name: String,
    responder: Responder,
}

impl fmt::Debug for MockTransport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MockTransport")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl MockTransport {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&ChatRequest) -> Result<ChatResponse, TransportFailure> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            responder: Box::new(f),
        }
    }

    /// Replies with the prompt itself.
    pub fn echo() -> Self {
        Self::new("echo", |req| Ok(ChatResponse::text(req.prompt())))
    }

    /// Replies with each scripted outcome in turn; fails once exhausted.
    pub fn scripted(script: impl IntoIterator<Item = Result<String, TransportFailure>>) -> Self {
        let queue = Mutex::new(script.into_iter().collect::<VecDeque<_>>());
        Self::new("scripted", move |_| {
            match queue.lock().expect("script lock").pop_front() {
                Some(r) => r.map(ChatResponse::text),
                None => Err(TransportFailure::Fatal("mock script exhausted".into())),
            }
        })
    }
}

impl Transport for MockTransport {
    fn identity(&self) -> String {
        format!("mock:{}", self.name)
    }

    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, TransportFailure> {
        (self.responder)(req)
    }
}

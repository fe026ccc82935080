//! HTTP API behind the problem-instance editor: browse, edit, execute and
//! verify instances, and talk to an assistant that sees the open instance.

mod problems;
mod sessions;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tower_http::services::ServeDir;
use zincpilot_core::corpus::{Corpus, CorpusError};
use zincpilot_core::gateway::{CompletionConfig, GatewayError, LiveTransport, Transport, DEFAULT_ENDPOINT};
use zincpilot_core::harness::{Harness, HarnessError};

pub use problems::{ExecuteRequest, ExecuteResponse, ProblemBody, ProblemSummary, Verdict, MAX_TIMEOUT_SECS};
pub use sessions::{context_preamble, ChatReply, ChatRequest, NewSession, SessionView, Turn};

/// Builds the assistant's transport from a session credential.
pub type TransportFactory = Arc<dyn Fn(&str) -> Result<Arc<dyn Transport>, GatewayError> + Send + Sync>;

/// Chat-completions over HTTPS at `endpoint`.
pub fn live_transport_factory(endpoint: impl Into<String>) -> TransportFactory {
    let endpoint = endpoint.into();
    Arc::new(move |key| Ok(Arc::new(LiveTransport::new(endpoint.clone(), key)?) as Arc<dyn Transport>))
}

pub struct EditorConfig {
    pub corpus_root: PathBuf,
    /// `None` when no MiniZinc toolchain is available; execution then
    /// answers 503.
    pub harness: Option<Harness>,
    pub static_dir: Option<PathBuf>,
    pub completion: CompletionConfig,
    pub transports: TransportFactory,
}

impl EditorConfig {
    pub fn new(corpus_root: impl Into<PathBuf>, harness: Option<Harness>) -> Self {
        Self {
            corpus_root: corpus_root.into(),
            harness,
            static_dir: None,
            completion: CompletionConfig::default(),
            transports: live_transport_factory(DEFAULT_ENDPOINT),
        }
    }
}

pub(crate) struct AppState {
    corpus_root: PathBuf,
    harness: Option<Arc<Harness>>,
    completion: CompletionConfig,
    transports: TransportFactory,
    sessions: sessions::Store,
    /// Serializes writes per instance.
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    fn corpus(&self) -> Result<Corpus, ApiError> {
        Ok(Corpus::open(&self.corpus_root)?)
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table")
            .entry(id.to_string())
            .or_default()
            .clone()
    }
}

pub(crate) type Shared = Arc<AppState>;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("validation failed")]
    ValidationFailed(Vec<String>),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Auth(String),
    #[error("no MiniZinc toolchain available: {0}")]
    ToolchainMissing(String),
    #[error("assistant request failed: {0}")]
    Upstream(String),
    #[error("{0}")]
    Internal(String),
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::UnknownInstance(id) => ApiError::NotFound(id),
            CorpusError::Invalid(findings) => ApiError::ValidationFailed(findings),
            CorpusError::MalformedInput { message, .. } => ApiError::ValidationFailed(vec![message]),
            CorpusError::InvalidObjective(_) | CorpusError::MissingVerifierModel(_) => {
                ApiError::ValidationFailed(vec![e.to_string()])
            }
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<HarnessError> for ApiError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::ToolchainMissing(_) => ApiError::ToolchainMissing(e.to_string()),
            HarnessError::InvalidConfig(m) => ApiError::BadRequest(m),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            ApiError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ApiError::ValidationFailed(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation_failed"),
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ApiError::Auth(_) => (StatusCode::UNAUTHORIZED, "auth"),
            ApiError::ToolchainMissing(_) => (StatusCode::SERVICE_UNAVAILABLE, "toolchain_missing"),
            ApiError::Upstream(_) => (StatusCode::BAD_GATEWAY, "upstream"),
            ApiError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let mut body = json!({"error": self.to_string(), "kind": kind});
        match &self {
            ApiError::ValidationFailed(findings) => body["findings"] = json!(findings),
            ApiError::Upstream(_) => body["retry_hint"] = json!("the assistant is unavailable; retry in a few seconds"),
            _ => {}
        }
        (status, Json(body)).into_response()
    }
}

async fn health(axum::extract::State(state): axum::extract::State<Shared>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "toolchain": state.harness.is_some(),
        "corpus": state.corpus_root.display().to_string(),
    }))
}

/// The complete API, with the editor's static assets at `/` when
/// configured.
pub fn router(config: EditorConfig) -> Router {
    let state: Shared = Arc::new(AppState {
        corpus_root: config.corpus_root,
        harness: config.harness.map(Arc::new),
        completion: config.completion,
        transports: config.transports,
        sessions: sessions::Store::default(),
        locks: Mutex::new(HashMap::new()),
    });
    let api = Router::new()
        .route("/health", get(health))
        .route("/problems", get(problems::list))
        .route("/problems/{id}", get(problems::get).put(problems::put))
        .route("/problems/{id}/execute", post(problems::execute))
        .route("/sessions", post(sessions::create))
        .route("/sessions/{id}", get(sessions::get).put(sessions::update))
        .route("/sessions/{id}/chat", post(sessions::chat))
        .with_state(state);
    match config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the process is stopped.
pub async fn serve(config: EditorConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("editor service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(config)).await
}

/// Blocking wrapper around [`serve`] for callers without a runtime.
pub fn serve_blocking(config: EditorConfig, addr: SocketAddr) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(config, addr))
}

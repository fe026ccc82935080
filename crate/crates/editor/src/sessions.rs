use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use serde::{Deserialize, Serialize};
use zincpilot_core::corpus::ProblemInstance;
use zincpilot_core::gateway::{Gateway, GatewayError, Message};

use crate::{ApiError, Shared};

/// A user-supplied API key. Held in memory only and never serialized.
#[derive(Clone)]
struct Credential(String);

impl fmt::Debug for Credential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Credential(<redacted>)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Default)]
struct Session {
    history: Vec<Turn>,
    instance: Option<String>,
    credential: Option<Credential>,
}

#[derive(Debug, Default)]
pub(crate) struct Store(Mutex<HashMap<String, Session>>);

impl Store {
    fn with<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> T) -> Result<T, ApiError> {
        let mut map = self.0.lock().expect("session store");
        let s = map
            .get_mut(id)
            .ok_or_else(|| ApiError::NotFound(format!("session {id}")))?;
        Ok(f(s))
    }
}

/// Body of `POST /sessions` and `PUT /sessions/{id}`; absent fields are
/// left unchanged.
#[derive(Debug, Default, Deserialize)]
pub struct NewSession {
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default)]
    pub instance: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SessionView {
    id: String,
    instance: Option<String>,
    has_credential: bool,
    history: Vec<Turn>,
}

fn view(id: &str, s: &Session) -> SessionView {
    SessionView {
        id: id.to_string(),
        instance: s.instance.clone(),
        has_credential: s.credential.is_some(),
        history: s.history.clone(),
    }
}

fn apply(s: &mut Session, body: NewSession) {
    if let Some(key) = body.api_key {
        s.credential = (!key.trim().is_empty()).then_some(Credential(key));
    }
    if body.instance.is_some() {
        s.instance = body.instance;
    }
}

pub async fn create(State(state): State<Shared>, Json(body): Json<NewSession>) -> (StatusCode, Json<SessionView>) {
    let id = uuid::Uuid::new_v4().to_string();
    let mut s = Session::default();
    apply(&mut s, body);
    let v = view(&id, &s);
    state.sessions.0.lock().expect("session store").insert(id, s);
    (StatusCode::CREATED, Json(v))
}

pub async fn get(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    state.sessions.with(&id, |s| Json(view(&id, s)))
}

pub async fn update(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<NewSession>,
) -> Result<Json<SessionView>, ApiError> {
    state.sessions.with(&id, |s| {
        apply(s, body);
        Json(view(&id, s))
    })
}

#[derive(Debug, Deserialize)]
pub struct ChatRequest {
    pub message: String,
    /// Switches the active instance before sending.
    #[serde(default)]
    pub instance: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatReply {
    pub reply: String,
    pub history: Vec<Turn>,
}

/// Problem context sent ahead of the conversation.
pub fn context_preamble(inst: &ProblemInstance) -> String {
    let data = if inst.data_text.trim().is_empty() {
        "(no data file)"
    } else {
        inst.data_text.trim()
    };
    let model = inst
        .ground_truth_model
        .as_deref()
        .map(str::trim)
        .unwrap_or("(no model yet)");
    format!(
        "You help curate MiniZinc benchmark problems. Answer questions about the problem below, \
         suggest fixes to its model or data, and propose alternative instances when asked. \
         Only suggest text; the user applies changes.\n\n\
         Problem `{id}` ({objective}):\n{description}\n\nData (.dzn):\n```\n{data}\n```\n\nModel (.mzn):\n```minizinc\n{model}\n```",
        id = inst.id(),
        objective = inst.objective().as_str(),
        description = inst.input.description.trim(),
    )
}

pub async fn chat(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<ChatRequest>,
) -> Result<Json<ChatReply>, ApiError> {
    if req.message.trim().is_empty() {
        return Err(ApiError::BadRequest("empty message".into()));
    }
    let (credential, instance, history) = state.sessions.with(&id, |s| {
        if req.instance.is_some() {
            s.instance = req.instance.clone();
        }
        (s.credential.clone(), s.instance.clone(), s.history.clone())
    })?;
    let credential = credential.ok_or_else(|| ApiError::Auth("no API key set for this session".into()))?;
    let instance = instance.ok_or_else(|| ApiError::BadRequest("no active instance in this session".into()))?;
    let inst = state.corpus()?.load(&instance)?;

    let mut messages = vec![Message {
        role: "system".into(),
        content: context_preamble(&inst),
    }];
    messages.extend(history.iter().map(|t| Message {
        role: t.role.clone(),
        content: t.content.clone(),
    }));
    messages.push(Message {
        role: "user".into(),
        content: req.message.clone(),
    });

    let factory = state.transports.clone();
    let completion = state.completion.clone();
    let response = tokio::task::spawn_blocking(move || {
        let transport = factory(&credential.0)?;
        Gateway::new(transport, completion).chat(messages)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
    .map_err(|e| match e {
        GatewayError::Auth(m) => ApiError::Auth(m),
        other => ApiError::Upstream(other.to_string()),
    })?;

    let history = state.sessions.with(&id, |s| {
        s.history.push(Turn {
            role: "user".into(),
            content: req.message,
        });
        s.history.push(Turn {
            role: "assistant".into(),
            content: response.content.clone(),
        });
        s.history.clone()
    })?;
    Ok(Json(ChatReply {
        reply: response.content,
        history,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn debug_output_redacts_the_credential() {
        let mut s = Session::default();
        apply(
            &mut s,
            NewSession {
                api_key: Some("sk-secret".into()),
                instance: Some("x".into()),
            },
        );
        let dbg = format!("{s:?}");
        assert!(!dbg.contains("sk-secret"), "{dbg}");
        assert!(dbg.contains("<redacted>"));
    }

    #[test]
    fn blank_key_clears_the_credential() {
        let mut s = Session::default();
        apply(
            &mut s,
            NewSession {
                api_key: Some("k".into()),
                instance: None,
            },
        );
        apply(
            &mut s,
            NewSession {
                api_key: Some("  ".into()),
                instance: None,
            },
        );
        assert!(s.credential.is_none());
    }
}

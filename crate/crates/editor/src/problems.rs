use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use zincpilot_core::corpus::{ExpectedOutput, ProblemInstance, INPUT_FILE};
use zincpilot_core::evaluator::{judge_instance, InstanceOutcome, Tolerance};
use zincpilot_core::harness::{SolveResult, SolverConfig};

use crate::{ApiError, Shared};

const EDITOR_STRATEGY: &str = "editor";
pub const MAX_TIMEOUT_SECS: u64 = 600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub id: String,
    pub title: String,
    pub domain: String,
    pub objective: String,
    pub verified: bool,
    pub source: String,
}

impl ProblemSummary {
    fn of(inst: &ProblemInstance) -> Self {
        Self {
            id: inst.id().to_string(),
            title: inst.input.metadata.title.clone(),
            domain: inst.input.metadata.domain.clone(),
            objective: inst.objective().as_str().to_string(),
            verified: inst.verified,
            source: inst.source(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct ListFilter {
    source: Option<String>,
    domain: Option<String>,
    objective: Option<String>,
}

impl ListFilter {
    fn accepts(&self, s: &ProblemSummary) -> bool {
        let ok = |want: &Option<String>, got: &str| want.as_deref().is_none_or(|w| w.eq_ignore_ascii_case(got));
        ok(&self.source, &s.source) && ok(&self.domain, &s.domain) && ok(&self.objective, &s.objective)
    }
}

pub async fn list(
    State(state): State<Shared>,
    Query(filter): Query<ListFilter>,
) -> Result<Json<Vec<ProblemSummary>>, ApiError> {
    let corpus = state.corpus()?;
    let mut out = Vec::new();
    for (id, loaded) in corpus.load_all() {
        match loaded {
            Ok(inst) => {
                let s = ProblemSummary::of(&inst);
                if filter.accepts(&s) {
                    out.push(s);
                }
            }
            Err(e) => log::warn!("skipping {id}: {e}"),
        }
    }
    Ok(Json(out))
}

/// Wire form of an instance: the `input.json` body plus the raw texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemBody {
    pub id: String,
    pub input: Value,
    #[serde(default)]
    pub data: String,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub output: Option<Value>,
    /// Overrides `input.verified` when present.
    #[serde(default)]
    pub verified: Option<bool>,
}

impl ProblemBody {
    fn of(inst: &ProblemInstance) -> Self {
        Self {
            id: inst.id().to_string(),
            input: inst.input_json(),
            data: inst.data_text.clone(),
            model: inst.ground_truth_model.clone(),
            output: inst.expected_output.as_ref().map(ExpectedOutput::to_json),
            verified: Some(inst.verified),
        }
    }
}

pub async fn get(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<ProblemBody>, ApiError> {
    let inst = state.corpus()?.load(&id)?;
    Ok(Json(ProblemBody::of(&inst)))
}

pub async fn put(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<ProblemBody>,
) -> Result<Json<ProblemBody>, ApiError> {
    let corpus = state.corpus()?;
    let dir = corpus.path_of(&id).ok_or_else(|| ApiError::NotFound(id.clone()))?;
    if body.id != id {
        return Err(ApiError::ValidationFailed(vec![format!(
            "body id `{}` does not match `{id}`",
            body.id
        )]));
    }
    let expected = match &body.output {
        None | Some(Value::Null) => None,
        Some(j) => {
            Some(ExpectedOutput::from_json(j).map_err(|e| ApiError::ValidationFailed(vec![format!("output: {e}")]))?)
        }
    };
    let mut inst = ProblemInstance::from_parts(&body.input, body.data, body.model, expected, &dir.join(INPUT_FILE))?;
    if let Some(v) = body.verified {
        inst.verified = v;
    }
    if inst.id() != id {
        return Err(ApiError::ValidationFailed(vec![format!(
            "metadata.identifier `{}` does not match `{id}`",
            inst.id()
        )]));
    }
    let lock = state.lock_for(&id);
    let _guard = lock.lock().await;
    corpus.save(&id, &inst)?;
    Ok(Json(ProblemBody::of(&corpus.load(&id)?)))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExecuteRequest {
    #[serde(default)]
    pub solver: Option<String>,
    /// Seconds, 1..=600; the service default when absent.
    #[serde(default)]
    pub timeout: Option<u64>,
    /// Unsaved editor buffers; the stored texts are used when absent.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub data: Option<String>,
    /// Write the executed model and data back to the instance.
    #[serde(default)]
    pub save: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Match,
    Mismatch,
    Error,
    Unscored,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecuteResponse {
    pub result: SolveResult,
    pub verdict: Verdict,
    pub outcome: InstanceOutcome,
    pub saved: bool,
}

fn verdict(o: &InstanceOutcome) -> Verdict {
    if o.excluded() {
        Verdict::Unscored
    } else if !o.executed {
        Verdict::Error
    } else if o.solution_correct {
        Verdict::Match
    } else {
        Verdict::Mismatch
    }
}

pub async fn execute(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<ExecuteRequest>,
) -> Result<Json<ExecuteResponse>, ApiError> {
    let harness = state
        .harness
        .clone()
        .ok_or_else(|| ApiError::ToolchainMissing("the service was started without MiniZinc".into()))?;
    let corpus = state.corpus()?;
    let inst = corpus.load(&id)?;

    let secs = req
        .timeout
        .unwrap_or_else(|| harness.config().time_limit.as_secs().clamp(1, MAX_TIMEOUT_SECS));
    if !(1..=MAX_TIMEOUT_SECS).contains(&secs) {
        return Err(ApiError::BadRequest(format!(
            "timeout must be within 1..={MAX_TIMEOUT_SECS} seconds, got {secs}"
        )));
    }
    let solver = req.solver.clone().unwrap_or_else(|| harness.config().solver.clone());
    let config = SolverConfig::new(solver, Duration::from_secs(secs))?;
    let model = req
        .model
        .clone()
        .or_else(|| inst.ground_truth_model.clone())
        .ok_or_else(|| ApiError::BadRequest(format!("`{id}` has no model to execute")))?;
    let data = req.data.clone().unwrap_or_else(|| inst.data_text.clone());

    let (result, outcome) = {
        let (model, data, inst) = (model.clone(), data.clone(), inst.clone());
        tokio::task::spawn_blocking(move || {
            let result = harness.solve_with(&model, &[&data], &config)?;
            let outcome = judge_instance(&inst, EDITOR_STRATEGY, result.clone(), &harness, Tolerance::default());
            Ok::<_, ApiError>((result, outcome))
        })
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??
    };

    if req.save {
        let lock = state.lock_for(&id);
        let _guard = lock.lock().await;
        let mut current = corpus.load(&id)?;
        current.ground_truth_model = Some(model);
        current.data_text = data;
        corpus.save(&id, &current)?;
    }
    Ok(Json(ExecuteResponse {
        verdict: verdict(&outcome),
        result,
        outcome,
        saved: req.save,
    }))
}

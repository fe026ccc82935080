//! Reproducible strategy runs over a corpus: generation, solving, judging,
//! and the manifest that ties the artifacts together.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{load_problem, to_pretty_json, Corpus, CorpusError, ProblemInstance};
use crate::evaluator::{judge_instance, InstanceOutcome, Tolerance};
use crate::gateway::{
    write_trace, CallRecord, CompletionConfig, Gateway, GatewayError, LiveTransport, MockTransport, ReplayTransport,
    Transport,
};
use crate::grammar::GrammarSpec;
use crate::harness::{Harness, SolverConfig};
use crate::strategies::{garbage_transport, oracle_transport, run_strategy_traced, Copilot, Intermediate, StrategyId};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const OUTCOME_FILE: &str = "outcome.json";
pub const GENERATED_FILE: &str = "generated.json";
pub const MODEL_FILE: &str = "model.mzn";

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BatchError + '_ {
    move |source| BatchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Where LLM responses come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransportSpec {
    /// Chat-completions endpoint; the key is read from `api_key_env`.
    Live { endpoint: String, api_key_env: String },
    /// Responses recorded in a JSON-lines trace.
    Replay { trace: PathBuf },
    /// In-process responder: `oracle` (ground-truth models), `garbage` or
    /// `echo`.
    Mock { name: String },
}

impl TransportSpec {
    pub const MOCKS: [&'static str; 3] = ["oracle", "garbage", "echo"];

    /// `instances` feed the oracle mock.
    pub fn build(&self, instances: &[ProblemInstance]) -> Result<Arc<dyn Transport>, BatchError> {
        Ok(match self {
            Self::Live { endpoint, api_key_env } => Arc::new(LiveTransport::from_env(endpoint.clone(), api_key_env)?),
            Self::Replay { trace } => Arc::new(ReplayTransport::open(trace)?),
            Self::Mock { name } => match name.as_str() {
                "oracle" => Arc::new(oracle_transport(instances)),
                "garbage" => Arc::new(garbage_transport()),
                "echo" => Arc::new(MockTransport::echo()),
                other => {
                    return Err(BatchError::Config(format!(
                        "unknown mock `{other}` (expected one of {})",
                        Self::MOCKS.join(", ")
                    )))
                }
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolVersions {
    pub zincpilot: String,
    pub minizinc: String,
}

/// Files written for one instance, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub instance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub calls: u32,
    #[serde(default)]
    pub degraded: bool,
    /// Set when the instance could not be processed at all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub strategy: StrategyId,
    pub transport: TransportSpec,
    pub completion: CompletionConfig,
    pub solver: SolverConfig,
    pub tolerance: Tolerance,
    /// Corpus the instances were selected from, when there was one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    /// Instance directories, in run order.
    pub instances: Vec<PathBuf>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    /// All calls of the run, in instance order; replaying it reproduces the
    /// run.
    pub trace: String,
    pub entries: Vec<ManifestEntry>,
    pub tool_versions: ToolVersions,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, BatchError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| BatchError::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// A replay transport over this run's own trace. `dir` holds the
    /// manifest.
    pub fn replay_spec(&self, dir: &Path) -> TransportSpec {
        TransportSpec::Replay {
            trace: dir.join(&self.trace),
        }
    }
}

/// Everything a batch needs besides the instances.
pub struct BatchSettings<'a> {
    pub strategy: StrategyId,
    pub transport: TransportSpec,
    pub gateway: &'a Gateway,
    pub harness: &'a Harness,
    pub grammar: &'a GrammarSpec,
    pub tolerance: Tolerance,
    pub jobs: usize,
}

struct Processed {
    entry: ManifestEntry,
    calls: Vec<CallRecord>,
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), BatchError> {
    let j = serde_json::to_value(v).map_err(|e| BatchError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, to_pretty_json(&j)).map_err(io_err(path))
}

#[derive(Serialize)]
struct GeneratedSummary<'a> {
    strategy: StrategyId,
    degraded: bool,
    intermediate: &'a Intermediate,
}

fn process(inst: &ProblemInstance, s: &BatchSettings<'_>, out: &Path) -> Result<Processed, BatchError> {
    let id = inst.id();
    let dir = out.join(id);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let copilot = Copilot {
        gateway: s.gateway,
        grammar: s.grammar,
        harness: Some(s.harness),
    };
    let traced = run_strategy_traced(s.strategy, inst, copilot);
    write_trace(&dir.join(TRACE_FILE), &traced.calls).map_err(io_err(&dir))?;
    let mut entry = ManifestEntry {
        instance: id.to_string(),
        outcome: Some(format!("{id}/{OUTCOME_FILE}")),
        model: None,
        calls: traced.calls.len() as u32,
        degraded: false,
        error: None,
    };
    let outcome = match &traced.result {
        Err(e) => {
            log::warn!("{id}: {} failed: {e}", s.strategy);
            InstanceOutcome::generation_failed(inst, s.strategy.as_str(), e)
        }
        Ok(generated) => {
            let model_path = dir.join(MODEL_FILE);
            fs::write(&model_path, &generated.model_text).map_err(io_err(&model_path))?;
            write_json(
                &dir.join(GENERATED_FILE),
                &GeneratedSummary {
                    strategy: generated.strategy,
                    degraded: generated.degraded,
                    intermediate: &generated.intermediate,
                },
            )?;
            entry.model = Some(format!("{id}/{MODEL_FILE}"));
            entry.degraded = generated.degraded;
            match s.harness.solve(&generated.model_text, &inst.data_text) {
                Ok(result) => judge_instance(inst, s.strategy.as_str(), result, s.harness, s.tolerance),
                Err(e) => {
                    entry.error = Some(format!("solver harness: {e}"));
                    entry.outcome = None;
                    return Ok(Processed {
                        entry,
                        calls: traced.calls,
                    });
                }
            }
        }
    };
    write_json(&dir.join(OUTCOME_FILE), &outcome)?;
    Ok(Processed {
        entry,
        calls: traced.calls,
    })
}

/// Instance directories of `corpus`, optionally restricted to `ids`.
pub fn select_instances(corpus: &Corpus, ids: &[String]) -> Result<Vec<PathBuf>, BatchError> {
    if ids.is_empty() {
        return Ok(corpus.entries().iter().map(|e| corpus.root().join(&e.path)).collect());
    }
    ids.iter()
        .map(|id| {
            corpus
                .path_of(id)
                .ok_or_else(|| BatchError::Corpus(CorpusError::UnknownInstance(id.clone())))
        })
        .collect()
}

/// Runs one strategy over the instance directories in `selection` and
/// writes everything under `out`. Instance-level failures are recorded in
/// the manifest, never returned.
pub fn run_batch(
    selection: &[PathBuf],
    corpus: Option<&Path>,
    s: &BatchSettings<'_>,
    out: &Path,
) -> Result<RunManifest, BatchError> {
    let started_at = Utc::now();
    fs::create_dir_all(out).map_err(io_err(out))?;
    let loaded: Vec<Result<ProblemInstance, CorpusError>> = selection.iter().map(|p| load_problem(p)).collect();
    let ids: Vec<String> = selection
        .iter()
        .zip(&loaded)
        .map(|(p, r)| match r {
            Ok(inst) => inst.id().to_string(),
            Err(_) => p.display().to_string(),
        })
        .collect();

    let slots: Vec<Mutex<Option<Result<Processed, BatchError>>>> = ids.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..s.jobs.clamp(1, ids.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(slot) = slots.get(i) else { break };
                if let Ok(inst) = &loaded[i] {
                    log::info!("[{}/{}] {} {}", i + 1, ids.len(), s.strategy, inst.id());
                    *slot.lock().expect("slot lock") = Some(process(inst, s, out));
                }
            });
        }
    });

    let mut entries = Vec::new();
    let mut all_calls = Vec::new();
    for ((id, inst), slot) in ids.iter().zip(&loaded).zip(slots) {
        let entry = match (inst, slot.into_inner().expect("slot lock")) {
            (Err(e), _) => ManifestEntry {
                instance: id.clone(),
                outcome: None,
                model: None,
                calls: 0,
                degraded: false,
                error: Some(e.to_string()),
            },
            (Ok(_), Some(Ok(p))) => {
                all_calls.extend(p.calls);
                p.entry
            }
            (Ok(_), Some(Err(e))) => ManifestEntry {
                instance: id.clone(),
                outcome: None,
                model: None,
                calls: 0,
                degraded: false,
                error: Some(e.to_string()),
            },
            (Ok(_), None) => unreachable!("every loaded instance is processed"),
        };
        entries.push(entry);
    }
    let trace_path = out.join(TRACE_FILE);
    write_trace(&trace_path, &all_calls).map_err(io_err(&trace_path))?;

    let minizinc = s.harness.version().unwrap_or_else(|e| format!("unknown ({e})"));
    let manifest = RunManifest {
        run_id: uuid::Uuid::new_v4().to_string(),
        strategy: s.strategy,
        transport: s.transport.clone(),
        completion: s.gateway.config().clone(),
        solver: s.harness.config().clone(),
        tolerance: s.tolerance,
        corpus: corpus.map(Path::to_path_buf),
        instances: selection.to_vec(),
        started_at,
        finished_at: Utc::now(),
        trace: TRACE_FILE.into(),
        entries,
        tool_versions: ToolVersions {
            zincpilot: env!("CARGO_PKG_VERSION").into(),
            minizinc,
        },
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Directories under `results` (including itself) that hold a manifest.
pub fn find_runs(results: &Path) -> Result<Vec<PathBuf>, BatchError> {
    let mut runs = Vec::new();
    let mut stack = vec![results.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join(MANIFEST_FILE).is_file() {
            runs.push(dir);
            continue;
        }
        for e in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let p = e.map_err(io_err(&dir))?.path();
            if p.is_dir() {
                stack.push(p);
            }
        }
    }
    runs.sort();
    Ok(runs)
}

/// Every recorded outcome of every run under `results`.
pub fn load_outcomes(results: &Path) -> Result<Vec<InstanceOutcome>, BatchError> {
    let mut out = Vec::new();
    for dir in find_runs(results)? {
        let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))?;
        for e in &manifest.entries {
            let Some(rel) = &e.outcome else { continue };
            let path = dir.join(rel);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let o: InstanceOutcome = serde_json::from_str(&text).map_err(|err| BatchError::Json {
                path: path.clone(),
                message: err.to_string(),
            })?;
            out.push(o);
        }
    }
    Ok(out)
}

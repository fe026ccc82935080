//! Problem instances in the four-file layout: `input.json`, `data.dzn`,
//! `model.mzn` and `output.json`, one directory per instance.

mod validate;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

pub use validate::{
    check_invariants, cross_validate, cross_validate_bindings, is_identifier, Finding, ValidationReport,
};

pub const INPUT_FILE: &str = "input.json";
pub const DATA_FILE: &str = "data.dzn";
pub const MODEL_FILE: &str = "model.mzn";
pub const OUTPUT_FILE: &str = "output.json";
pub const INDEX_FILE: &str = "index.json";

/// Key under which `output.json` stores the objective value.
pub const OBJECTIVE_KEY: &str = "_objective";
/// Marker key for instances whose ground truth is infeasible.
pub const UNSAT_KEY: &str = "_unsatisfiable";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{0}: no input.json")]
    MissingInput(PathBuf),
    #[error("{path}: malformed input: {message}")]
    MalformedInput { path: PathBuf, message: String },
    #[error("invalid objective `{0}`: expected one of satisfy, maximize, minimize")]
    InvalidObjective(String),
    #[error("{0}: satisfaction instance has no model.mzn to verify solutions against")]
    MissingVerifierModel(PathBuf),
    #[error("instance violates schema invariants: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Satisfy,
    Maximize,
    Minimize,
}

impl Objective {
    pub fn parse(s: &str) -> Result<Self, CorpusError> {
        match s {
            "satisfy" => Ok(Self::Satisfy),
            "maximize" => Ok(Self::Maximize),
            "minimize" => Ok(Self::Minimize),
            other => Err(CorpusError::InvalidObjective(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Satisfy => "satisfy",
            Self::Maximize => "maximize",
            Self::Minimize => "minimize",
        }
    }

    pub fn is_optimization(self) -> bool {
        self != Self::Satisfy
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named input parameter or output variable. An empty `shape` is a scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSpec {
    pub definition: String,
    pub symbol: String,
    #[serde(default)]
    pub shape: Vec<String>,
}

pub type ParamSpec = SymbolSpec;
pub type OutputSpec = SymbolSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub title: String,
    pub identifier: String,
    #[serde(default)]
    pub domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subdomain: Option<String>,
    pub objective: Objective,
    #[serde(default)]
    pub keywords: Vec<String>,
    /// Source-specific keys, kept verbatim.
    #[serde(flatten)]
    pub extra: IndexMap<String, Json>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInput {
    pub description: String,
    #[serde(default)]
    pub parameters: Vec<ParamSpec>,
    #[serde(default)]
    pub output: Vec<OutputSpec>,
    pub metadata: Metadata,
}

/// The ground-truth result from `output.json`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpectedOutput {
    pub objective_value: Option<f64>,
    pub variable_values: IndexMap<String, Json>,
    pub unsatisfiable: bool,
}

impl ExpectedOutput {
    pub fn from_json(j: &Json) -> Result<Self, String> {
        let obj = j.as_object().ok_or("output.json must hold a JSON object")?;
        let mut out = ExpectedOutput::default();
        for (k, v) in obj {
            match k.as_str() {
                OBJECTIVE_KEY => {
                    out.objective_value = match v {
                        Json::Null => None,
                        v => Some(v.as_f64().ok_or_else(|| format!("{OBJECTIVE_KEY} must be a number"))?),
                    }
                }
                UNSAT_KEY => out.unsatisfiable = v.as_bool().ok_or_else(|| format!("{UNSAT_KEY} must be a boolean"))?,
                _ => {
                    out.variable_values.insert(k.clone(), v.clone());
                }
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Json {
        let mut m = serde_json::Map::new();
        if let Some(x) = self.objective_value {
            m.insert(OBJECTIVE_KEY.into(), number(x));
        }
        if self.unsatisfiable {
            m.insert(UNSAT_KEY.into(), Json::Bool(true));
        }
        for (k, v) in &self.variable_values {
            m.insert(k.clone(), v.clone());
        }
        Json::Object(m)
    }
}

/// Integral values are written without a fractional part.
fn number(x: f64) -> Json {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        Json::from(x as i64)
    } else {
        serde_json::Number::from_f64(x).map(Json::Number).unwrap_or(Json::Null)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub input: ProblemInput,
    pub data_text: String,
    pub ground_truth_model: Option<String>,
    pub expected_output: Option<ExpectedOutput>,
    pub verified: bool,
    /// Unknown top-level keys of `input.json`, kept verbatim.
    pub extra: IndexMap<String, Json>,
}

impl ProblemInstance {
    pub fn id(&self) -> &str {
        &self.input.metadata.identifier
    }

    pub fn objective(&self) -> Objective {
        self.input.metadata.objective
    }

    /// Dataset the instance was curated from: `metadata.source` when
    /// present, otherwise the identifier prefix (`nlp4lp_12` → `nlp4lp`).
    pub fn source(&self) -> String {
        if let Some(Json::String(s)) = self.input.metadata.extra.get("source") {
            return s.clone();
        }
        let id = self.id();
        id.split(['_', '-']).next().unwrap_or(id).to_string()
    }

    /// JSON body of `input.json`, including the `verified` flag.
    pub fn input_json(&self) -> Json {
        let mut v = serde_json::to_value(&self.input).expect("input serializes");
        let obj = v.as_object_mut().expect("object");
        for (k, x) in &self.extra {
            obj.insert(k.clone(), x.clone());
        }
        obj.insert("verified".into(), Json::Bool(self.verified));
        v
    }

    /// Builds an instance from an `input.json` body plus the raw texts.
    /// Ground-truth requirements are not checked here.
    pub fn from_parts(
        input_json: &Json,
        data_text: String,
        ground_truth_model: Option<String>,
        expected_output: Option<ExpectedOutput>,
        path: &Path,
    ) -> Result<Self, CorpusError> {
        let malformed = |message: String| CorpusError::MalformedInput {
            path: path.to_path_buf(),
            message,
        };
        let obj = input_json
            .as_object()
            .ok_or_else(|| malformed("input.json must hold a JSON object".into()))?;
        if let Some(o) = obj.get("metadata").and_then(|m| m.get("objective")) {
            match o {
                Json::String(s) => {
                    Objective::parse(s)?;
                }
                other => return Err(CorpusError::InvalidObjective(other.to_string())),
            }
        }
        let input: ProblemInput = serde_json::from_value(input_json.clone()).map_err(|e| malformed(e.to_string()))?;
        let verified = match obj.get("verified") {
            None | Some(Json::Null) => false,
            Some(Json::Bool(b)) => *b,
            Some(_) => return Err(malformed("`verified` must be a boolean".into())),
        };
        let known = ["description", "parameters", "output", "metadata", "verified"];
        let extra = obj
            .iter()
            .filter(|(k, _)| !known.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let inst = ProblemInstance {
            input,
            data_text,
            ground_truth_model,
            expected_output,
            verified,
            extra,
        };
        let problems = validate::schema_violations(&inst);
        if !problems.is_empty() {
            return Err(malformed(problems.join("; ")));
        }
        Ok(inst)
    }
}

fn read_optional(path: &Path) -> Result<Option<String>, CorpusError> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// Loads one instance directory.
pub fn load_problem(root: &Path) -> Result<ProblemInstance, CorpusError> {
    let input_path = root.join(INPUT_FILE);
    let input_text = read_optional(&input_path)?.ok_or_else(|| CorpusError::MissingInput(root.to_path_buf()))?;
    let input_json: Json = serde_json::from_str(&input_text).map_err(|e| CorpusError::MalformedInput {
        path: input_path.clone(),
        message: e.to_string(),
    })?;
    let data_text = read_optional(&root.join(DATA_FILE))?.unwrap_or_default();
    let model = read_optional(&root.join(MODEL_FILE))?;
    let output_path = root.join(OUTPUT_FILE);
    let expected = match read_optional(&output_path)? {
        None => None,
        Some(text) => {
            let malformed = |message: String| CorpusError::MalformedInput {
                path: output_path.clone(),
                message,
            };
            let j: Json = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
            Some(ExpectedOutput::from_json(&j).map_err(malformed)?)
        }
    };
    let inst = ProblemInstance::from_parts(&input_json, data_text, model, expected, &input_path)?;
    if inst.objective() == Objective::Satisfy && inst.ground_truth_model.is_none() {
        return Err(CorpusError::MissingVerifierModel(root.to_path_buf()));
    }
    Ok(inst)
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CorpusError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

fn write_or_remove(path: &Path, contents: Option<&[u8]>) -> Result<(), CorpusError> {
    match contents {
        Some(c) => write_atomic(path, c),
        None => match fs::remove_file(path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io_err(path)(e)),
            _ => Ok(()),
        },
    }
}

pub fn to_pretty_json(v: &Json) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Writes an instance directory. The instance must satisfy its invariants.
pub fn save_problem(inst: &ProblemInstance, root: &Path) -> Result<(), CorpusError> {
    let problems = check_invariants(inst);
    if !problems.is_empty() {
        return Err(CorpusError::Invalid(problems));
    }
    fs::create_dir_all(root).map_err(io_err(root))?;
    write_atomic(&root.join(INPUT_FILE), to_pretty_json(&inst.input_json()).as_bytes())?;
    let data = (!inst.data_text.is_empty()).then_some(inst.data_text.as_bytes());
    write_or_remove(&root.join(DATA_FILE), data)?;
    write_or_remove(
        &root.join(MODEL_FILE),
        inst.ground_truth_model.as_deref().map(str::as_bytes),
    )?;
    let output = inst.expected_output.as_ref().map(|o| to_pretty_json(&o.to_json()));
    write_or_remove(&root.join(OUTPUT_FILE), output.as_deref().map(str::as_bytes))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub path: String,
}

/// A corpus root: instance directories plus `index.json`.
#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
    entries: Vec<IndexEntry>,
}

impl Corpus {
    /// Opens a corpus. Without an index file, every subdirectory holding an
    /// `input.json` is an instance, named after the directory.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, CorpusError> {
        let root = root.into();
        let index_path = root.join(INDEX_FILE);
        let entries = match read_optional(&index_path)? {
            Some(text) => serde_json::from_str(&text).map_err(|e| CorpusError::MalformedInput {
                path: index_path.clone(),
                message: e.to_string(),
            })?,
            None => {
                let mut entries = Vec::new();
                for entry in fs::read_dir(&root).map_err(io_err(&root))? {
                    let entry = entry.map_err(io_err(&root))?;
                    if entry.path().join(INPUT_FILE).is_file() {
                        let name = entry.file_name().to_string_lossy().into_owned();
                        entries.push(IndexEntry {
                            id: name.clone(),
                            path: name,
                        });
                    }
                }
                entries.sort_by(|a, b| a.id.cmp(&b.id));
                entries
            }
        };
        let mut seen = std::collections::HashSet::new();
        let dups: Vec<String> = entries
            .iter()
            .filter(|e| !seen.insert(e.id.clone()))
            .map(|e| format!("duplicate instance id `{}` in index", e.id))
            .collect();
        if !dups.is_empty() {
            return Err(CorpusError::Invalid(dups));
        }
        Ok(Self { root, entries })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn path_of(&self, id: &str) -> Option<PathBuf> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .map(|e| self.root.join(&e.path))
    }

    pub fn load(&self, id: &str) -> Result<ProblemInstance, CorpusError> {
        let path = self
            .path_of(id)
            .ok_or_else(|| CorpusError::UnknownInstance(id.to_string()))?;
        load_problem(&path)
    }

    /// Loads every instance; failures are reported per instance.
    pub fn load_all(&self) -> Vec<(String, Result<ProblemInstance, CorpusError>)> {
        self.entries
            .iter()
            .map(|e| (e.id.clone(), load_problem(&self.root.join(&e.path))))
            .collect()
    }

    pub fn save(&self, id: &str, inst: &ProblemInstance) -> Result<(), CorpusError> {
        let path = self
            .path_of(id)
            .ok_or_else(|| CorpusError::UnknownInstance(id.to_string()))?;
        save_problem(inst, &path)
    }

    pub fn write_index(&self) -> Result<(), CorpusError> {
        let j = serde_json::to_value(&self.entries).expect("index serializes");
        write_atomic(&self.root.join(INDEX_FILE), to_pretty_json(&j).as_bytes())
    }
}

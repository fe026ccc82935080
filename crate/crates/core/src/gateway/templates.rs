use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Every slot name a template may reference.
pub const SLOTS: [&str; 11] = [
    "problem_description",
    "data_nomenclature",
    "knowledge_graph",
    "minizinc_code",
    "syntax_error_message",
    "objective_type",
    "parameters_and_variables",
    "constraints",
    "objective",
    "current_code",
    "minizinc_grammar",
];

const EMPTY_DATA_NOTES: &str = include_str!("../../assets/prompts/empty_data_notes.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Baseline,
    Cot,
    KgCreate,
    KgCodegen,
    CodeValidation,
    GrammarValidation,
    AgenticParamsVars,
    AgenticConstraints,
    AgenticObjective,
    AgenticStitch,
}

impl TemplateId {
    pub const ALL: [TemplateId; 10] = [
        Self::Baseline,
        Self::Cot,
        Self::KgCreate,
        Self::KgCodegen,
        Self::CodeValidation,
        Self::GrammarValidation,
        Self::AgenticParamsVars,
        Self::AgenticConstraints,
        Self::AgenticObjective,
        Self::AgenticStitch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Cot => "cot",
            Self::KgCreate => "kg_create",
            Self::KgCodegen => "kg_codegen",
            Self::CodeValidation => "code_validation",
            Self::GrammarValidation => "grammar_validation",
            Self::AgenticParamsVars => "agentic_params_vars",
            Self::AgenticConstraints => "agentic_constraints",
            Self::AgenticObjective => "agentic_objective",
            Self::AgenticStitch => "agentic_stitch",
        }
    }

    /// Template text with `{slot}` markers.
    pub fn body(self) -> &'static str {
        match self {
            Self::Baseline => include_str!("../../assets/prompts/baseline.txt"),
            Self::Cot => include_str!("../../assets/prompts/cot.txt"),
            Self::KgCreate => include_str!("../../assets/prompts/kg_create.txt"),
            Self::KgCodegen => include_str!("../../assets/prompts/kg_codegen.txt"),
            Self::CodeValidation => include_str!("../../assets/prompts/code_validation.txt"),
            Self::GrammarValidation => include_str!("../../assets/prompts/grammar_validation.txt"),
            Self::AgenticParamsVars => include_str!("../../assets/prompts/agentic_params_vars.txt"),
            Self::AgenticConstraints => include_str!("../../assets/prompts/agentic_constraints.txt"),
            Self::AgenticObjective => include_str!("../../assets/prompts/agentic_objective.txt"),
            Self::AgenticStitch => include_str!("../../assets/prompts/agentic_stitch.txt"),
        }
        .trim_end()
    }

    /// Slots referenced by the body, in first-use order.
    pub fn slots(self) -> Vec<&'static str> {
        let mut seen = BTreeSet::new();
        markers(self.body())
            .filter_map(|(_, _, name)| SLOTS.iter().find(|s| **s == name).copied())
            .filter(|s| seen.insert(*s))
            .collect()
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| PromptError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("missing prompt slot `{0}`")]
    MissingSlot(String),
    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),
}

/// `{name}` markers: (start, end, name) byte ranges.
fn markers(body: &str) -> impl Iterator<Item = (usize, usize, &str)> {
    let mut pos = 0;
    std::iter::from_fn(move || {
        while let Some(open) = body[pos..].find('{').map(|i| pos + i) {
            let close = body[open..].find('}').map(|i| open + i)?;
            let name = &body[open + 1..close];
            if !name.is_empty() && name.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
                pos = close + 1;
                return Some((open, close + 1, name));
            }
            pos = open + 1;
        }
        None
    })
}

/// Substitutes every slot marker in one pass (values are not re-scanned).
pub fn render_prompt<K, V>(template: TemplateId, slots: impl IntoIterator<Item = (K, V)>) -> Result<String, PromptError>
where
    K: AsRef<str>,
    V: AsRef<str>,
{
    let slots: Vec<(K, V)> = slots.into_iter().collect();
    let lookup = |name: &str| slots.iter().find(|(k, _)| k.as_ref() == name).map(|(_, v)| v.as_ref());
    let body = template.body();
    let mut out = String::with_capacity(body.len() * 2);
    let mut last = 0;
    for (start, end, name) in markers(body) {
        if !SLOTS.contains(&name) {
            continue;
        }
        let value = lookup(name).ok_or_else(|| PromptError::MissingSlot(name.to_string()))?;
        out.push_str(&body[last..start]);
        out.push_str(value);
        last = end;
    }
    out.push_str(&body[last..]);
    Ok(out)
}

/// [`render_prompt`] addressed by template name.
pub fn render_named<K, V>(template: &str, slots: impl IntoIterator<Item = (K, V)>) -> Result<String, PromptError>
where
    K: AsRef<str>,
    V: AsRef<str>,
{
    render_prompt(template.parse()?, slots)
}

/// The two instructions appended to prompts for instances whose data file is
/// empty.
pub fn empty_data_notes() -> [&'static str; 2] {
    let mut lines = EMPTY_DATA_NOTES.lines();
    [lines.next().unwrap_or_default(), lines.next().unwrap_or_default()]
}

/// Appends the empty-data instructions. Callers apply this only when the
/// instance has no data.
pub fn augment_for_empty_data(prompt: &str) -> String {
    let [embed, only] = empty_data_notes();
    format!("{prompt}\n{embed}\n{only}")
}

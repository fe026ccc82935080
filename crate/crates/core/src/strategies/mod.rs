//! The copilot strategies: fixed-shape pipelines of templated LLM calls that
//! turn a problem instance into MiniZinc model text.

mod extract;
mod nomenclature;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Objective, ProblemInstance};
use crate::gateway::{CallRecord, ChatResponse, Gateway, GatewayError, MockTransport, RunBudget, TemplateId};
use crate::grammar::{render_grammar_for_prompt, shipped_grammar, validate_syntax, GrammarSpec};
use crate::harness::{Harness, HarnessError};

pub use extract::extract_code;
pub use nomenclature::data_nomenclature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyId {
    ZeroShot,
    #[serde(rename = "cot")]
    CoT,
    #[serde(rename = "kg")]
    KnowledgeGraph,
    #[serde(rename = "cot-code")]
    CoTCode,
    #[serde(rename = "cot-grammar")]
    CoTGrammar,
    #[serde(rename = "cot-code-grammar")]
    CoTCodeGrammar,
    Agentic,
    AgenticCode,
}

impl StrategyId {
    pub const ALL: [StrategyId; 8] = [
        Self::ZeroShot,
        Self::CoT,
        Self::KnowledgeGraph,
        Self::CoTCode,
        Self::CoTGrammar,
        Self::CoTCodeGrammar,
        Self::Agentic,
        Self::AgenticCode,
    ];

    /// Exact number of LLM calls a run makes.
    pub fn budget(self) -> u32 {
        match self {
            Self::ZeroShot | Self::CoT => 1,
            Self::KnowledgeGraph | Self::CoTCode | Self::CoTGrammar => 2,
            Self::CoTCodeGrammar => 3,
            Self::Agentic => 4,
            Self::AgenticCode => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ZeroShot => "zero-shot",
            Self::CoT => "cot",
            Self::KnowledgeGraph => "kg",
            Self::CoTCode => "cot-code",
            Self::CoTGrammar => "cot-grammar",
            Self::CoTCodeGrammar => "cot-code-grammar",
            Self::Agentic => "agentic",
            Self::AgenticCode => "agentic-code",
        }
    }

    /// Human-readable name for reports.
    pub fn label(self) -> &'static str {
        match self {
            Self::ZeroShot => "Zero-shot",
            Self::CoT => "Chain-of-Thought",
            Self::KnowledgeGraph => "Knowledge Graph",
            Self::CoTCode => "CoT + Code Validation",
            Self::CoTGrammar => "CoT + Grammar",
            Self::CoTCodeGrammar => "CoT + Code & Grammar",
            Self::Agentic => "Agentic",
            Self::AgenticCode => "Agentic + Code Validation",
        }
    }

    pub fn needs_harness(self) -> bool {
        matches!(self, Self::CoTCode | Self::CoTCodeGrammar | Self::AgenticCode)
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| {
            let known: Vec<&str> = Self::ALL.iter().map(|i| i.as_str()).collect();
            format!("unknown strategy `{s}` (expected one of {})", known.join(", "))
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StrategyError {
    #[error("{template} response contained no code")]
    EmptyResponse { template: TemplateId },
    #[error("knowledge-graph generation returned nothing")]
    KgEmpty,
    #[error("agentic stage `{0}` returned no code")]
    FragmentEmpty(&'static str),
    #[error("strategy {0} needs a solver harness")]
    HarnessRequired(StrategyId),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// Artifacts produced along the way.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Intermediate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge_graph: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_vars: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    /// Grammar diagnostics of the model sent for grammar repair.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub syntax_diagnostics: Vec<String>,
    /// Harness error text of the model sent for code validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedModel {
    pub strategy: StrategyId,
    pub model_text: String,
    pub calls: Vec<CallRecord>,
    pub intermediate: Intermediate,
    /// A repair call produced no code and the earlier model was kept.
    #[serde(default)]
    pub degraded: bool,
}

/// Everything a strategy run may use. The harness is only needed by the
/// code-validation variants.
#[derive(Clone, Copy)]
pub struct Copilot<'a> {
    pub gateway: &'a Gateway,
    pub grammar: &'a GrammarSpec,
    pub harness: Option<&'a Harness>,
}

impl<'a> Copilot<'a> {
    /// Shipped grammar, no harness.
    pub fn bare(gateway: &'a Gateway) -> Self {
        Self {
            gateway,
            grammar: shipped_grammar(),
            harness: None,
        }
    }
}

/// Turtle text of a generated knowledge graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeGraphText {
    pub ttl: String,
}

impl KnowledgeGraphText {
    pub const NODE_CLASSES: [&'static str; 4] = [":Parameter", ":Variable", ":Constraint", ":Objective"];

    /// Node classes with no `a :Class` statement.
    pub fn missing_classes(&self) -> Vec<&'static str> {
        Self::NODE_CLASSES
            .into_iter()
            .filter(|c| {
                !self.ttl.lines().any(|l| {
                    let words: Vec<&str> = l
                        .split_whitespace()
                        .map(|t| t.trim_end_matches([';', '.', ',']))
                        .collect();
                    words.windows(2).any(|w| matches!(w[0], "a" | "rdf:type") && w[1] == *c)
                })
            })
            .collect()
    }
}

/// Value for the `{objective_type}` slot.
pub fn objective_type(o: Objective) -> &'static str {
    match o {
        Objective::Minimize => "minimization",
        Objective::Maximize => "maximization",
        Objective::Satisfy => "satisfaction",
    }
}

struct Run<'a> {
    inst: &'a ProblemInstance,
    gateway: &'a Gateway,
    budget: RunBudget,
    calls: Vec<CallRecord>,
    nomenclature: String,
    empty_data: bool,
}

impl<'a> Run<'a> {
    fn new(id: StrategyId, inst: &'a ProblemInstance, gateway: &'a Gateway) -> Self {
        Self {
            inst,
            gateway,
            budget: RunBudget::labelled(id.budget(), inst.id(), id.as_str()),
            calls: Vec::new(),
            nomenclature: data_nomenclature(inst),
            empty_data: inst.data_text.trim().is_empty(),
        }
    }

    fn call(&mut self, template: TemplateId, extra: &[(&str, &str)]) -> Result<&str, StrategyError> {
        let base = [
            ("problem_description", self.inst.input.description.as_str()),
            ("data_nomenclature", self.nomenclature.as_str()),
            ("objective_type", objective_type(self.inst.objective())),
        ];
        let slots = base.iter().chain(extra).copied();
        let rec = self
            .gateway
            .complete_template(&self.budget, template, slots, self.empty_data)?;
        self.calls.push(rec);
        Ok(&self.calls.last().expect("just pushed").response)
    }

    fn code(&mut self, template: TemplateId, extra: &[(&str, &str)]) -> Result<String, StrategyError> {
        let response = self.call(template, extra)?;
        extract_code(response).ok_or(StrategyError::EmptyResponse { template })
    }
}

/// A strategy run together with every call it completed, including the
/// calls made before a failure.
#[derive(Debug)]
pub struct TracedRun {
    pub result: Result<GeneratedModel, StrategyError>,
    pub calls: Vec<CallRecord>,
}

/// Runs `id` on `inst`. The number of calls always equals `id.budget()`.
pub fn run_strategy(
    id: StrategyId,
    inst: &ProblemInstance,
    copilot: Copilot<'_>,
) -> Result<GeneratedModel, StrategyError> {
    run_strategy_traced(id, inst, copilot).result
}

pub fn run_strategy_traced(id: StrategyId, inst: &ProblemInstance, copilot: Copilot<'_>) -> TracedRun {
    if id.needs_harness() && copilot.harness.is_none() {
        return TracedRun {
            result: Err(StrategyError::HarnessRequired(id)),
            calls: Vec::new(),
        };
    }
    let mut run = Run::new(id, inst, copilot.gateway);
    let mut inter = Intermediate::default();
    let mut degraded = false;
    let result = drive(id, &mut run, copilot, &mut inter, &mut degraded);
    let calls = run.calls;
    let result = result.map(|model_text| {
        debug_assert_eq!(calls.len() as u32, id.budget());
        GeneratedModel {
            strategy: id,
            model_text,
            calls: calls.clone(),
            intermediate: inter,
            degraded,
        }
    });
    TracedRun { result, calls }
}

fn drive(
    id: StrategyId,
    run: &mut Run<'_>,
    copilot: Copilot<'_>,
    inter: &mut Intermediate,
    degraded: &mut bool,
) -> Result<String, StrategyError> {
    Ok(match id {
        StrategyId::ZeroShot => run.code(TemplateId::Baseline, &[])?,
        StrategyId::CoT => run.code(TemplateId::Cot, &[])?,
        StrategyId::KnowledgeGraph => knowledge_graph(run, inter)?,
        StrategyId::Agentic => agentic(run, inter)?,
        StrategyId::CoTCode | StrategyId::CoTGrammar | StrategyId::CoTCodeGrammar | StrategyId::AgenticCode => {
            let mut model = if id == StrategyId::AgenticCode {
                agentic(run, inter)?
            } else {
                run.code(TemplateId::Cot, &[])?
            };
            if matches!(id, StrategyId::CoTGrammar | StrategyId::CoTCodeGrammar) {
                model = grammar_repair(run, copilot.grammar, model, inter, degraded)?;
            }
            if let Some(harness) = copilot.harness.filter(|_| id.needs_harness()) {
                model = code_repair(run, harness, model, inter, degraded)?;
            }
            model
        }
    })
}

pub fn run_zero_shot(inst: &ProblemInstance, gateway: &Gateway) -> Result<GeneratedModel, StrategyError> {
    run_strategy(StrategyId::ZeroShot, inst, Copilot::bare(gateway))
}

pub fn run_cot(inst: &ProblemInstance, gateway: &Gateway) -> Result<GeneratedModel, StrategyError> {
    run_strategy(StrategyId::CoT, inst, Copilot::bare(gateway))
}

pub fn run_knowledge_graph(inst: &ProblemInstance, gateway: &Gateway) -> Result<GeneratedModel, StrategyError> {
    run_strategy(StrategyId::KnowledgeGraph, inst, Copilot::bare(gateway))
}

pub fn run_agentic(inst: &ProblemInstance, gateway: &Gateway) -> Result<GeneratedModel, StrategyError> {
    run_strategy(StrategyId::Agentic, inst, Copilot::bare(gateway))
}

/// CoT or agentic generation followed by one code-validation call.
pub fn run_with_code_validation(
    base: StrategyId,
    inst: &ProblemInstance,
    gateway: &Gateway,
    harness: &Harness,
) -> Result<GeneratedModel, StrategyError> {
    let id = match base {
        StrategyId::CoT => StrategyId::CoTCode,
        StrategyId::Agentic => StrategyId::AgenticCode,
        other => panic!("code validation is defined over cot and agentic, not {other}"),
    };
    let copilot = Copilot {
        harness: Some(harness),
        ..Copilot::bare(gateway)
    };
    run_strategy(id, inst, copilot)
}

/// CoT generation followed by grammar validation, plus code validation when
/// a harness is given.
pub fn run_with_grammar_validation(
    inst: &ProblemInstance,
    gateway: &Gateway,
    grammar: &GrammarSpec,
    harness: Option<&Harness>,
) -> Result<GeneratedModel, StrategyError> {
    let id = if harness.is_some() {
        StrategyId::CoTCodeGrammar
    } else {
        StrategyId::CoTGrammar
    };
    run_strategy(
        id,
        inst,
        Copilot {
            gateway,
            grammar,
            harness,
        },
    )
}

fn knowledge_graph(run: &mut Run<'_>, inter: &mut Intermediate) -> Result<String, StrategyError> {
    let response = run.call(TemplateId::KgCreate, &[])?;
    // the graph may come fenced as ```turtle
    let ttl = extract_code(response).ok_or(StrategyError::KgEmpty)?;
    let missing = KnowledgeGraphText { ttl: ttl.clone() }.missing_classes();
    if !missing.is_empty() {
        log::warn!("{}: knowledge graph lacks {}", run.inst.id(), missing.join(", "));
    }
    let model = run.code(TemplateId::KgCodegen, &[("knowledge_graph", &ttl)])?;
    inter.knowledge_graph = Some(ttl);
    Ok(model)
}

fn agentic(run: &mut Run<'_>, inter: &mut Intermediate) -> Result<String, StrategyError> {
    let stage = |run: &mut Run<'_>, t, name, extra: &[(&str, &str)]| {
        run.code(t, extra).map_err(|e| match e {
            StrategyError::EmptyResponse { .. } => StrategyError::FragmentEmpty(name),
            other => other,
        })
    };
    let pv = stage(run, TemplateId::AgenticParamsVars, "params_vars", &[])?;
    let cons = stage(
        run,
        TemplateId::AgenticConstraints,
        "constraints",
        &[("parameters_and_variables", &pv)],
    )?;
    let obj = stage(
        run,
        TemplateId::AgenticObjective,
        "objective",
        &[("parameters_and_variables", &pv), ("constraints", &cons)],
    )?;
    let model = stage(
        run,
        TemplateId::AgenticStitch,
        "stitch",
        &[
            ("parameters_and_variables", &pv),
            ("constraints", &cons),
            ("objective", &obj),
        ],
    )?;
    inter.params_vars = Some(pv);
    inter.constraints = Some(cons);
    inter.objective = Some(obj);
    Ok(model)
}

/// Keeps `previous` (and flags the run) when a repair yields no code.
fn repaired(
    result: Result<String, StrategyError>,
    previous: String,
    degraded: &mut bool,
) -> Result<String, StrategyError> {
    match result {
        Ok(code) => Ok(code),
        Err(StrategyError::EmptyResponse { template }) => {
            log::warn!("{template} repair returned no code; keeping the previous model");
            *degraded = true;
            Ok(previous)
        }
        Err(e) => Err(e),
    }
}

fn grammar_repair(
    run: &mut Run<'_>,
    grammar: &GrammarSpec,
    model: String,
    inter: &mut Intermediate,
    degraded: &mut bool,
) -> Result<String, StrategyError> {
    let diags: Vec<String> = validate_syntax(&model, grammar)
        .iter()
        .map(ToString::to_string)
        .collect();
    let message = diags.join("\n");
    let rendered = render_grammar_for_prompt(grammar);
    let result = run.code(
        TemplateId::GrammarValidation,
        &[
            ("current_code", &model),
            ("syntax_error_message", &message),
            ("minizinc_grammar", &rendered),
        ],
    );
    inter.syntax_diagnostics = diags;
    repaired(result, model, degraded)
}

fn code_repair(
    run: &mut Run<'_>,
    harness: &Harness,
    model: String,
    inter: &mut Intermediate,
    degraded: &mut bool,
) -> Result<String, StrategyError> {
    let outcome = harness.solve(&model, &run.inst.data_text)?;
    let error = outcome.error_text().to_string();
    let result = run.code(
        TemplateId::CodeValidation,
        &[("minizinc_code", &model), ("syntax_error_message", &error)],
    );
    inter.compile_error = (!error.is_empty()).then_some(error);
    repaired(result, model, degraded)
}

/// A mock transport answering every prompt with the ground-truth model of
/// the instance whose description it contains.
pub fn oracle_transport(instances: &[ProblemInstance]) -> MockTransport {
    let mut table: Vec<(String, String)> = instances
        .iter()
        .filter_map(|i| Some((i.input.description.clone(), i.ground_truth_model.clone()?)))
        .filter(|(d, _)| !d.trim().is_empty())
        .collect();
    // longest first so a description that contains another wins
    table.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
    let table = Arc::new(table);
    MockTransport::new("oracle", move |req| {
        let prompt = req.prompt();
        table
            .iter()
            .find(|(d, _)| prompt.contains(d.as_str()))
            .map(|(_, m)| ChatResponse::text(format!("```minizinc\n{}\n```", m.trim_end())))
            .ok_or_else(|| crate::gateway::TransportFailure::Fatal("oracle: prompt matches no instance".into()))
    })
}

/// Text that is not a MiniZinc model; every call gets it.
pub const GARBAGE_RESPONSE: &str = "I'm sorry, I can't do that. :-( }}{{ ;; end";

/// A mock transport whose responses never parse as MiniZinc.
pub fn garbage_transport() -> MockTransport {
    MockTransport::new("garbage", |_| Ok(ChatResponse::text(GARBAGE_RESPONSE)))
}

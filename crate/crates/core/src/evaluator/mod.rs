//! Execution and solution accuracy, aggregation, and leaderboard output.

mod leaderboard;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::ProblemInstance;
use crate::harness::{Harness, SolveResult, SolveStatus};
use crate::strategies::StrategyId;

pub use leaderboard::{emit_leaderboard, LeaderboardFormat, LEADERBOARD_SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no outcomes to score")]
    EmptySet,
}

/// Objective equality: `|got - expected| <= max(abs, rel * |expected|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-6, rel: 1e-4 }
    }
}

pub fn compare_objective(got: f64, expected: f64, tol: Tolerance) -> bool {
    (got - expected).abs() <= tol.abs.max(tol.rel * expected.abs())
}

/// How an outcome was scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Judgement {
    /// Optimization instance: objective compared to the expected value.
    Objective {
        expected: f64,
        got: Option<f64>,
        tolerance: Tolerance,
    },
    /// Satisfaction instance: candidate checked by the ground-truth model.
    Verifier { accepted: bool },
    /// The candidate model reported no solution exists.
    Unsatisfiable { expected_unsatisfiable: bool },
    /// The ground truth is unsatisfiable but the candidate found a solution.
    ExpectedUnsatisfiable,
    /// Ran, but produced no solution (e.g. search exhausted its budget).
    NoSolution,
    /// Did not compile or run.
    NotExecuted,
    /// The strategy produced no model.
    GenerationFailed { error: String },
    /// Optimization instance without an expected objective; excluded.
    MissingExpected,
    /// The ground-truth verifier itself failed; excluded.
    CorpusFault { error: String },
}

impl Judgement {
    pub fn excludes(&self) -> bool {
        matches!(self, Self::MissingExpected | Self::CorpusFault { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub instance: String,
    pub source: String,
    pub strategy: String,
    pub executed: bool,
    pub solution_correct: bool,
    /// Absent when generation failed. Stored without timings or raw output
    /// so that outcome files are reproducible.
    #[serde(default, with = "solve_summary")]
    pub solve: Option<SolveResult>,
    pub detail: Judgement,
}

impl InstanceOutcome {
    pub fn excluded(&self) -> bool {
        self.detail.excludes()
    }

    /// Outcome for a run whose strategy failed before producing a model.
    pub fn generation_failed(inst: &ProblemInstance, strategy: &str, error: impl ToString) -> Self {
        Self {
            instance: inst.id().to_string(),
            source: inst.source(),
            strategy: strategy.to_string(),
            executed: false,
            solution_correct: false,
            solve: None,
            detail: Judgement::GenerationFailed {
                error: error.to_string(),
            },
        }
    }
}

mod solve_summary {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<SolveResult>, s: S) -> Result<S::Ok, S::Error> {
        r.as_ref()
            .map(|r| SolveResult {
                wall_seconds: 0.0,
                stdout: String::new(),
                stderr: String::new(),
                ..r.clone()
            })
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<SolveResult>, D::Error> {
        Option::<SolveResult>::deserialize(d)
    }
}

/// Whether the run counts as executed: it compiled and ran to a verdict.
pub fn executed(r: &SolveResult) -> bool {
    match r.status {
        SolveStatus::Optimal | SolveStatus::Satisfied | SolveStatus::Unsatisfiable => true,
        SolveStatus::Unknown => r.error.is_none() && r.output_parse_error.is_none(),
        SolveStatus::CompileError | SolveStatus::RuntimeError | SolveStatus::Timeout => false,
    }
}

/// Scores one solve of a candidate model against `inst`'s ground truth.
/// `verifier` checks satisfaction candidates.
pub fn judge_instance(
    inst: &ProblemInstance,
    strategy: &str,
    solve: SolveResult,
    verifier: &Harness,
    tol: Tolerance,
) -> InstanceOutcome {
    let ran = executed(&solve);
    let expected = inst.expected_output.as_ref();
    let expected_unsat = expected.is_some_and(|e| e.unsatisfiable);
    let (correct, detail) = if !ran {
        (false, Judgement::NotExecuted)
    } else if solve.status == SolveStatus::Unsatisfiable {
        (
            expected_unsat,
            Judgement::Unsatisfiable {
                expected_unsatisfiable: expected_unsat,
            },
        )
    } else if expected_unsat {
        (false, Judgement::ExpectedUnsatisfiable)
    } else if inst.objective().is_optimization() {
        match expected.and_then(|e| e.objective_value) {
            None => (false, Judgement::MissingExpected),
            Some(exp) => {
                let got = solve.found_solution().then_some(solve.objective_value).flatten();
                (
                    got.is_some_and(|g| compare_objective(g, exp, tol)),
                    Judgement::Objective {
                        expected: exp,
                        got,
                        tolerance: tol,
                    },
                )
            }
        }
    } else if !solve.found_solution() {
        (false, Judgement::NoSolution)
    } else {
        let model = inst.ground_truth_model.as_deref().unwrap_or_default();
        let outputs: Vec<String> = inst.input.output.iter().map(|o| o.symbol.clone()).collect();
        match verifier.verify_satisfaction(model, &inst.data_text, &solve.assignments, &outputs) {
            Ok(accepted) => (accepted, Judgement::Verifier { accepted }),
            Err(e) => (false, Judgement::CorpusFault { error: e.to_string() }),
        }
    };
    InstanceOutcome {
        instance: inst.id().to_string(),
        source: inst.source(),
        strategy: strategy.to_string(),
        executed: ran,
        solution_correct: correct,
        solve: Some(solve),
        detail,
    }
}

fn scored(outcomes: &[InstanceOutcome]) -> impl Iterator<Item = &InstanceOutcome> {
    outcomes.iter().filter(|o| !o.excluded())
}

/// Fraction of scored outcomes that executed.
pub fn execution_accuracy(outcomes: &[InstanceOutcome]) -> Result<f64, EvalError> {
    let n = scored(outcomes).count();
    if n == 0 {
        return Err(EvalError::EmptySet);
    }
    Ok(scored(outcomes).filter(|o| o.executed).count() as f64 / n as f64)
}

/// Fraction of scored outcomes that are correct.
pub fn solution_accuracy(outcomes: &[InstanceOutcome]) -> Result<f64, EvalError> {
    let n = scored(outcomes).count();
    if n == 0 {
        return Err(EvalError::EmptySet);
    }
    Ok(scored(outcomes).filter(|o| o.solution_correct).count() as f64 / n as f64)
}

/// `k/n` as a percentage with two decimals, e.g. `41/65 -> "63.08"`.
pub fn format_percent(k: usize, n: usize) -> String {
    if n == 0 {
        return "-".into();
    }
    format!("{:.2}", k as f64 * 100.0 / n as f64)
}

/// Counts for one (source, strategy) cell; `n` excludes exclusions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregate {
    pub source: String,
    pub strategy: String,
    pub n: usize,
    pub executed: usize,
    pub correct: usize,
    pub excluded: usize,
}

impl Aggregate {
    pub fn e_acc(&self) -> f64 {
        ratio(self.executed, self.n)
    }

    pub fn s_acc(&self) -> f64 {
        ratio(self.correct, self.n)
    }

    fn add(&mut self, o: &InstanceOutcome) {
        if o.excluded() {
            self.excluded += 1;
            return;
        }
        self.n += 1;
        self.executed += o.executed as usize;
        self.correct += o.solution_correct as usize;
    }

    fn merge(&mut self, other: &Aggregate) {
        self.n += other.n;
        self.executed += other.executed;
        self.correct += other.correct;
        self.excluded += other.excluded;
    }
}

fn ratio(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub instance: String,
    pub strategy: String,
    pub reason: String,
}

pub const TOTAL_SOURCE: &str = "total";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub outcomes: Vec<InstanceOutcome>,
    /// Per (source, strategy), strategies in canonical order then sources
    /// alphabetically.
    pub aggregates: Vec<Aggregate>,
    /// One row per strategy summed over sources.
    pub totals: Vec<Aggregate>,
    pub exclusions: Vec<Exclusion>,
    pub tolerance: Tolerance,
}

/// Canonical strategies first, in their declared order; others by name.
pub fn strategy_order(name: &str) -> (usize, String) {
    let pos = name
        .parse::<StrategyId>()
        .ok()
        .and_then(|id| StrategyId::ALL.iter().position(|s| *s == id));
    (pos.unwrap_or(StrategyId::ALL.len()), name.to_string())
}

impl EvaluationReport {
    /// Aggregates `outcomes`; the result does not depend on their order.
    pub fn from_outcomes(mut outcomes: Vec<InstanceOutcome>, tolerance: Tolerance) -> Self {
        outcomes.sort_by(|a, b| {
            strategy_order(&a.strategy)
                .cmp(&strategy_order(&b.strategy))
                .then_with(|| a.source.cmp(&b.source))
                .then_with(|| a.instance.cmp(&b.instance))
        });
        let mut cells: BTreeMap<((usize, String), String), Aggregate> = BTreeMap::new();
        let mut totals: BTreeMap<(usize, String), Aggregate> = BTreeMap::new();
        let mut exclusions = Vec::new();
        for o in &outcomes {
            cells
                .entry((strategy_order(&o.strategy), o.source.clone()))
                .or_insert_with(|| Aggregate {
                    source: o.source.clone(),
                    strategy: o.strategy.clone(),
                    ..Aggregate::default()
                })
                .add(o);
            if o.excluded() {
                let reason = match &o.detail {
                    Judgement::CorpusFault { error } => format!("verifier failed: {error}"),
                    _ => "no expected objective value".to_string(),
                };
                exclusions.push(Exclusion {
                    instance: o.instance.clone(),
                    strategy: o.strategy.clone(),
                    reason,
                });
            }
        }
        for ((key, _), cell) in &cells {
            totals
                .entry(key.clone())
                .or_insert_with(|| Aggregate {
                    source: TOTAL_SOURCE.into(),
                    strategy: cell.strategy.clone(),
                    ..Aggregate::default()
                })
                .merge(cell);
        }
        Self {
            outcomes,
            aggregates: cells.into_values().collect(),
            totals: totals.into_values().collect(),
            exclusions,
            tolerance,
        }
    }

    pub fn sources(&self) -> Vec<String> {
        let mut s: Vec<String> = self.aggregates.iter().map(|a| a.source.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn strategies(&self) -> Vec<String> {
        self.totals.iter().map(|t| t.strategy.clone()).collect()
    }

    pub fn cell(&self, source: &str, strategy: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.source == source && a.strategy == strategy)
    }

    pub fn total(&self, strategy: &str) -> Option<&Aggregate> {
        self.totals.iter().find(|a| a.strategy == strategy)
    }
}

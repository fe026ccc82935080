use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::{Objective, ProblemInstance, SymbolSpec};
use crate::dzn::{parse_dzn, Bindings, DznError, Value};

/// Letter or underscore first, then alphanumerics and underscores.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn symbol_violations(kind: &str, specs: &[SymbolSpec], out: &mut Vec<String>) {
    let mut seen = HashSet::new();
    for s in specs {
        if !is_identifier(&s.symbol) {
            out.push(format!("{kind} symbol `{}` is not a valid identifier", s.symbol));
        }
        if !seen.insert(s.symbol.as_str()) {
            out.push(format!("duplicate {kind} symbol `{}`", s.symbol));
        }
    }
}

/// Schema checks that do not depend on which ground-truth files exist.
pub(super) fn schema_violations(inst: &ProblemInstance) -> Vec<String> {
    let mut out = Vec::new();
    if inst.input.metadata.identifier.trim().is_empty() {
        out.push("metadata.identifier is empty".to_string());
    }
    symbol_violations("parameter", &inst.input.parameters, &mut out);
    symbol_violations("output", &inst.input.output, &mut out);
    if let Some(exp) = &inst.expected_output {
        if !exp.unsatisfiable {
            if inst.objective().is_optimization() && exp.objective_value.is_none() {
                out.push("output.json of an optimization instance lacks `_objective`".to_string());
            }
            if inst.objective() == Objective::Satisfy && exp.variable_values.is_empty() {
                out.push("output.json of a satisfaction instance holds no variable values".to_string());
            }
        }
    }
    out
}

/// Every invariant an instance must meet before it is written.
pub fn check_invariants(inst: &ProblemInstance) -> Vec<String> {
    let mut out = schema_violations(inst);
    if inst.objective() == Objective::Satisfy && inst.ground_truth_model.is_none() {
        out.push("satisfaction instance requires a model.mzn verifier".to_string());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Finding {
    MissingSymbol {
        symbol: String,
    },
    ShapeMismatch {
        symbol: String,
        expected: String,
        found: String,
    },
    UnusedBinding {
        symbol: String,
    },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::MissingSymbol { symbol } => write!(f, "missing-symbol({symbol})"),
            Finding::ShapeMismatch {
                symbol,
                expected,
                found,
            } => {
                write!(f, "shape-mismatch({symbol}, expected {expected}, found {found})")
            }
            Finding::UnusedBinding { symbol } => write!(f, "unused-binding({symbol})"),
        }
    }
}

pub type ValidationReport = Vec<Finding>;

fn describe_dims(n: usize) -> String {
    if n == 0 {
        "scalar".to_string()
    } else {
        format!("{n}-D")
    }
}

/// Resolves a shape label to an extent: an integer literal, a `lo..hi`
/// range, or the name of an integer binding.
fn resolve_extent(label: &str, bindings: &Bindings) -> Option<usize> {
    let label = label.trim();
    if let Ok(n) = label.parse::<usize>() {
        return Some(n);
    }
    if let Some((lo, hi)) = label.split_once("..") {
        let (lo, hi) = (resolve_int(lo, bindings)?, resolve_int(hi, bindings)?);
        return Some(if hi < lo { 0 } else { (hi - lo + 1) as usize });
    }
    match bindings.get(label)? {
        Value::Int(n) if *n >= 0 => Some(*n as usize),
        Value::Set(s) => Some(s.len()),
        _ => None,
    }
}

fn resolve_int(s: &str, bindings: &Bindings) -> Option<i64> {
    let s = s.trim();
    s.parse().ok().or_else(|| bindings.get(s)?.as_i64())
}

fn check_shape(spec: &SymbolSpec, value: &Value, bindings: &Bindings) -> Option<Finding> {
    let mismatch = |expected: String, found: String| Finding::ShapeMismatch {
        symbol: spec.symbol.clone(),
        expected,
        found,
    };
    let dims = value.dimensions();
    if dims != spec.shape.len() {
        return Some(mismatch(describe_dims(spec.shape.len()), describe_dims(dims)));
    }
    let Value::Array(a) = value else { return None };
    for (i, (label, extent)) in spec.shape.iter().zip(a.extents()).enumerate() {
        if let Some(want) = resolve_extent(label, bindings) {
            if want != extent {
                return Some(mismatch(
                    format!("extent {want} ({label}) in dimension {}", i + 1),
                    format!("extent {extent}"),
                ));
            }
        }
    }
    None
}

/// Compares declared parameters with the parsed data file. Findings follow
/// parameter order, then binding order for unused bindings.
pub fn cross_validate(inst: &ProblemInstance) -> Result<ValidationReport, DznError> {
    let bindings = parse_dzn(&inst.data_text)?;
    Ok(cross_validate_bindings(&inst.input.parameters, &bindings))
}

pub fn cross_validate_bindings(params: &[SymbolSpec], bindings: &Bindings) -> ValidationReport {
    let mut findings = Vec::new();
    for spec in params {
        match bindings.get(&spec.symbol) {
            None => findings.push(Finding::MissingSymbol {
                symbol: spec.symbol.clone(),
            }),
            Some(v) => findings.extend(check_shape(spec, v, bindings)),
        }
    }
    let declared: HashSet<&str> = params.iter().map(|p| p.symbol.as_str()).collect();
    for sym in bindings.symbols() {
        if !declared.contains(sym) {
            findings.push(Finding::UnusedBinding {
                symbol: sym.to_string(),
            });
        }
    }
    findings
}

use crate::dzn::{parse_dzn, Bindings, DznError, Value};

pub const SOLUTION_SEPARATOR: &str = "----------";
pub const SEARCH_COMPLETE: &str = "==========";
pub const UNSATISFIABLE: &str = "=====UNSATISFIABLE=====";
pub const UNKNOWN: &str = "=====UNKNOWN=====";
pub const UNBOUNDED: &str = "=====UNBOUNDED=====";
pub const UNSAT_OR_UNBOUNDED: &str = "=====UNSATorUNBOUNDED=====";
pub const ERROR: &str = "=====ERROR=====";

/// Binding that carries the objective value in solver output.
pub const OBJECTIVE_SYMBOL: &str = "_objective";

/// Final search verdict printed by the toolchain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Solutions printed, search not complete.
    Solutions,
    /// Search complete (optimal for optimization problems).
    Complete,
    Unsatisfiable,
    Unbounded,
    Unknown,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedOutput {
    pub verdict: Verdict,
    pub solution_count: usize,
    pub objective_value: Option<f64>,
    /// Assignments of the last solution, without `_objective`.
    pub assignments: Bindings,
    /// Raw text of the last solution block.
    pub last_block: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot parse solver output: {error}")]
pub struct OutputParseError {
    pub error: DznError,
    pub raw: String,
}

/// Parses `--output-mode dzn` solver output. The last solution block wins;
/// an objective is taken from its `_objective` binding.
pub fn parse_solution(stdout: &str) -> Result<ParsedOutput, OutputParseError> {
    let mut blocks: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut verdict = None;
    for line in stdout.lines() {
        match line.trim_end() {
            SOLUTION_SEPARATOR => blocks.push(std::mem::take(&mut current)),
            SEARCH_COMPLETE => verdict = Some(Verdict::Complete),
            UNSATISFIABLE => verdict = Some(Verdict::Unsatisfiable),
            UNBOUNDED | UNSAT_OR_UNBOUNDED => verdict = Some(Verdict::Unbounded),
            UNKNOWN => verdict = Some(Verdict::Unknown),
            ERROR => verdict = Some(Verdict::Error),
            _ => {
                current.push_str(line);
                current.push('\n');
            }
        }
    }
    let verdict = verdict.unwrap_or(if blocks.is_empty() {
        Verdict::Unknown
    } else {
        Verdict::Solutions
    });
    let mut out = ParsedOutput {
        verdict,
        solution_count: blocks.len(),
        objective_value: None,
        assignments: Bindings::new(),
        last_block: blocks.last().cloned(),
    };
    if let Some(block) = blocks.last() {
        let mut b = parse_dzn(block).map_err(|error| OutputParseError {
            error,
            raw: block.clone(),
        })?;
        out.objective_value = b.remove(OBJECTIVE_SYMBOL).as_ref().and_then(Value::as_f64);
        out.assignments = b;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_block() {
        let p = parse_solution("x = 2;\n----------\n").unwrap();
        assert_eq!(p.verdict, Verdict::Solutions);
        assert_eq!(p.assignments.get("x"), Some(&Value::Int(2)));
        assert_eq!(p.objective_value, None);
    }

    #[test]
    fn last_block_wins() {
        let out = "x = 5;\n_objective = 5;\n----------\nx = 3;\n_objective = 3;\n----------\n==========\n";
        let p = parse_solution(out).unwrap();
        assert_eq!(p.verdict, Verdict::Complete);
        assert_eq!(p.solution_count, 2);
        assert_eq!(p.objective_value, Some(3.0));
        assert_eq!(p.assignments.get("x"), Some(&Value::Int(3)));
        assert!(!p.assignments.contains("_objective"));
    }

    #[test]
    fn objective_only() {
        assert_eq!(
            parse_solution("_objective = 21;\n----------\n")
                .unwrap()
                .objective_value,
            Some(21.0)
        );
    }

    #[test]
    fn markers() {
        assert_eq!(
            parse_solution("=====UNSATISFIABLE=====\n").unwrap().verdict,
            Verdict::Unsatisfiable
        );
        assert_eq!(parse_solution("=====UNKNOWN=====\n").unwrap().verdict, Verdict::Unknown);
        assert_eq!(parse_solution("").unwrap().verdict, Verdict::Unknown);
    }

    #[test]
    fn enum_output_is_a_parse_error() {
        let err = parse_solution("c = RED;\n----------\n").unwrap_err();
        assert_eq!(err.raw, "c = RED;\n");
    }
}

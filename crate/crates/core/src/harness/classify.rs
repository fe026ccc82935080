use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    SyntaxError,
    UndefinedIdentifier,
    ArrayIndexing,
    FunctionNotFound,
    VariableRedefinition,
    FlatteningError,
    TimeoutError,
    SolverLimitation,
    MissingData,
    Unclassified,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 10] = [
        Self::SyntaxError,
        Self::UndefinedIdentifier,
        Self::ArrayIndexing,
        Self::FunctionNotFound,
        Self::VariableRedefinition,
        Self::FlatteningError,
        Self::TimeoutError,
        Self::SolverLimitation,
        Self::MissingData,
        Self::Unclassified,
    ];
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

// First match wins. Missing data precedes undefined identifiers because
// both are reported as type errors about unknown values; solver limitations
// precede flattening because the linearizer aborts during flattening.
static TABLE: LazyLock<Vec<(ErrorCategory, Regex)>> = LazyLock::new(|| {
    let rows: [(ErrorCategory, &str); 9] = [
        (
            ErrorCategory::SyntaxError,
            r"syntax error|unexpected end of file|lexer error",
        ),
        (
            ErrorCategory::MissingData,
            r"did you forget to specify a data file|variable `[^']*' must be defined|no value for (parameter|variable)",
        ),
        (
            ErrorCategory::UndefinedIdentifier,
            r"undefined identifier|unknown identifier",
        ),
        (
            ErrorCategory::FunctionNotFound,
            r"no function or predicate with|no matching (function|predicate)",
        ),
        (
            ErrorCategory::VariableRedefinition,
            r"multiple assignment|already (defined|declared)|multiply defined|redefinition of",
        ),
        (
            ErrorCategory::ArrayIndexing,
            r"array access out of bounds|index out of (range|bounds)|index set mismatch|type-inst: expected `array|array index|array dimensions? (mismatch|do not match)|wrong number of (array )?(indices|dimensions)",
        ),
        (
            ErrorCategory::SolverLimitation,
            r"unable to create linear formulation|not supported|unsupported (constraint|type|feature)|cannot handle|quadratic constraint",
        ),
        (
            ErrorCategory::FlatteningError,
            r"flattening error|unbounded (coefficient|variable|domain)|evaluation error|cannot be (flattened|linearized)",
        ),
        (ErrorCategory::TimeoutError, r"time ?limit|timed out|timeout"),
    ];
    rows.into_iter()
        .map(|(c, p)| (c, Regex::new(&format!("(?i){p}")).expect("valid pattern")))
        .collect()
});

/// Maps toolchain error text to a category. Total: anything unmatched is
/// `Unclassified`.
pub fn classify_error(text: &str) -> ErrorCategory {
    let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
    TABLE
        .iter()
        .find(|(_, re)| re.is_match(&normalized))
        .map(|(c, _)| *c)
        .unwrap_or(ErrorCategory::Unclassified)
}

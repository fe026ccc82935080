//! Runs models through the MiniZinc toolchain and interprets the outcome.

mod classify;
mod output;
mod process;
mod toolchain;

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::sync::{Arc, LazyLock, Mutex};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Objective;
use crate::dzn::{bindings_serde, serialize, value_to_dzn, Bindings};

pub use classify::{classify_error, ErrorCategory};
pub use output::{parse_solution, OutputParseError, ParsedOutput, Verdict, OBJECTIVE_SYMBOL};
pub use process::{RawRun, Semaphore};
pub use toolchain::{Toolchain, MINIZINC_ENV};

/// Grace period between the solver's own time limit and the hard kill.
pub const KILL_GRACE: Duration = Duration::from_secs(5);
/// Safety margin so that process teardown stays inside the grace period.
const KILL_MARGIN: Duration = Duration::from_millis(250);

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("MiniZinc toolchain not available: {0}")]
    ToolchainMissing(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("verifier model does not compile: {0}")]
    VerifierCompileError(String),
    #[error("I/O error while running the solver: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SolverConfig {
    pub solver: String,
    #[serde(with = "millis")]
    pub time_limit: Duration,
    #[serde(default)]
    pub extra_flags: Vec<String>,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

pub const DEFAULT_SOLVER: &str = "gecode";
pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(60);

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            solver: DEFAULT_SOLVER.to_string(),
            time_limit: DEFAULT_TIME_LIMIT,
            extra_flags: Vec::new(),
        }
    }
}

impl SolverConfig {
    pub fn new(solver: impl Into<String>, time_limit: Duration) -> Result<Self, HarnessError> {
        let c = Self {
            solver: solver.into(),
            time_limit,
            extra_flags: Vec::new(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.time_limit.is_zero() {
            return Err(HarnessError::InvalidConfig("time limit must be positive".into()));
        }
        if self.solver.trim().is_empty() {
            return Err(HarnessError::InvalidConfig("solver tag is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Satisfied,
    Unsatisfiable,
    CompileError,
    RuntimeError,
    Timeout,
    Unknown,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveError {
    pub category: ErrorCategory,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective_value: Option<f64>,
    #[serde(with = "bindings_serde")]
    pub assignments: Bindings,
    pub error: Option<SolveError>,
    pub wall_seconds: f64,
    /// Set when solver output could not be read; status is then `Unknown`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_parse_error: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub stdout: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub stderr: String,
}

impl SolveResult {
    pub fn found_solution(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Satisfied)
    }

    /// Error text suitable for a repair prompt; empty when the run succeeded.
    pub fn error_text(&self) -> &str {
        self.error.as_ref().map(|e| e.raw.as_str()).unwrap_or("")
    }
}

static SOLVE_ITEM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?s)(?:^|;)\s*solve\b(?:\s*::.*?)?\s*\b(minimize|maximize|satisfy)\b\s*(.*?)\s*;")
        .expect("valid pattern")
});
static LINE_COMMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"%[^\n]*").expect("valid pattern"));
static BLOCK_COMMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)/\*.*?\*/").expect("valid pattern"));
static ERROR_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^\s*(Error:|MiniZinc: \w+ error|.*\berror:)").expect("valid pattern"));

/// The kind of objective declared by the model's solve item, with the
/// objective expression for optimization problems.
pub fn declared_objective(model_text: &str) -> Option<(Objective, String)> {
    let text = BLOCK_COMMENT.replace_all(model_text, " ");
    let text = LINE_COMMENT.replace_all(&text, "");
    let caps = SOLVE_ITEM.captures(&text)?;
    let kind = match &caps[1] {
        "minimize" => Objective::Minimize,
        "maximize" => Objective::Maximize,
        _ => Objective::Satisfy,
    };
    Some((kind, caps[2].to_string()))
}

fn hard_deadline(limit: Duration) -> Duration {
    limit + KILL_GRACE - KILL_MARGIN
}

/// Runs models against data through the toolchain.
#[derive(Debug, Clone)]
pub struct Harness {
    toolchain: Toolchain,
    config: SolverConfig,
    permits: Arc<Semaphore>,
    cache: Option<Arc<Mutex<HashMap<String, SolveResult>>>>,
}

impl Harness {
    pub fn new(toolchain: Toolchain, config: SolverConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        Ok(Self {
            toolchain,
            config,
            permits: Arc::new(Semaphore::new(1)),
            cache: None,
        })
    }

    pub fn discover(config: SolverConfig) -> Result<Self, HarnessError> {
        Self::new(Toolchain::discover()?, config)
    }

    /// Caps the number of concurrently running solver processes.
    pub fn with_parallelism(mut self, n: usize) -> Self {
        self.permits = Arc::new(Semaphore::new(n.max(1)));
        self
    }

    /// Memoizes results by (config, model, data). Solves are deterministic for
    /// the bundled CP backends, so identical inputs need one run.
    pub fn with_cache(mut self) -> Self {
        self.cache = Some(Arc::default());
        self
    }

    /// Same toolchain, permits and cache with another solver configuration.
    pub fn with_config(&self, config: SolverConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        Ok(Self { config, ..self.clone() })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn toolchain(&self) -> &Toolchain {
        &self.toolchain
    }

    /// `minizinc --version`, first line.
    pub fn version(&self) -> Result<String, HarnessError> {
        let raw = self.run_raw(&["--version".to_string()], &[], Duration::from_secs(60))?;
        Ok(raw.stdout.lines().next().unwrap_or("").trim().to_string())
    }

    fn run_raw(&self, args: &[String], files: &[(&str, &str)], deadline: Duration) -> Result<RawRun, HarnessError> {
        let _permit = self.permits.acquire();
        let dir = tempfile::Builder::new().prefix("zincpilot-").tempdir()?;
        let mut argv = args.to_vec();
        for (name, contents) in files {
            fs::write(dir.path().join(name), contents)?;
            // relative names keep temp paths out of diagnostics
            argv.push(name.to_string());
        }
        process::run(self.toolchain.program(), &argv, dir.path(), deadline)
    }

    fn solve_args(&self, config: &SolverConfig) -> Vec<String> {
        let mut args = vec![
            "--solver".to_string(),
            config.solver.clone(),
            "--time-limit".to_string(),
            config.time_limit.as_millis().to_string(),
            "--output-mode".to_string(),
            "dzn".to_string(),
            "--output-objective".to_string(),
        ];
        args.extend(config.extra_flags.iter().cloned());
        args
    }

    /// Solves `model_text` with `data_text` under the harness configuration.
    pub fn solve(&self, model_text: &str, data_text: &str) -> Result<SolveResult, HarnessError> {
        self.solve_with(model_text, &[data_text], &self.config)
    }

    /// Solves with any number of data files (empty ones are skipped).
    pub fn solve_with(
        &self,
        model_text: &str,
        data: &[&str],
        config: &SolverConfig,
    ) -> Result<SolveResult, HarnessError> {
        config.validate()?;
        let key = self.cache.as_ref().map(|_| {
            let mut k = serde_json::to_string(config).expect("config serializes");
            for part in std::iter::once(model_text).chain(data.iter().copied()) {
                k.push('\u{0}');
                k.push_str(part);
            }
            k
        });
        if let (Some(cache), Some(k)) = (&self.cache, &key) {
            if let Some(hit) = cache.lock().expect("cache lock").get(k) {
                return Ok(hit.clone());
            }
        }
        let mut files = vec![("model.mzn", model_text)];
        let names: Vec<String> = (0..data.len()).map(|i| format!("data{i}.dzn")).collect();
        for (name, text) in names.iter().zip(data) {
            if !text.trim().is_empty() {
                files.push((name.as_str(), text));
            }
        }
        let raw = self.run_raw(&self.solve_args(config), &files, hard_deadline(config.time_limit))?;
        let declared = declared_objective(model_text);
        let mut result = interpret(&raw, config.time_limit, declared.as_ref().map(|d| d.0));
        if let Some((kind, expr)) = &declared {
            if kind.is_optimization() && result.found_solution() && result.objective_value.is_none() {
                result.objective_value =
                    self.evaluate_expression(model_text, data, &result.assignments, expr, config)?;
            }
        }
        if let (Some(cache), Some(k)) = (&self.cache, key) {
            // running out of time depends on load, not on the inputs
            if result.status != SolveStatus::Timeout {
                cache.lock().expect("cache lock").insert(k, result.clone());
            }
        }
        Ok(result)
    }

    /// Re-evaluates the model's objective with `assignments` fixed. Used when
    /// the toolchain does not print `_objective`.
    pub fn evaluate_objective(
        &self,
        model_text: &str,
        data: &[&str],
        assignments: &Bindings,
    ) -> Result<Option<f64>, HarnessError> {
        match declared_objective(model_text) {
            Some((kind, expr)) if kind.is_optimization() => {
                self.evaluate_expression(model_text, data, assignments, &expr, &self.config)
            }
            _ => Ok(None),
        }
    }

    fn evaluate_expression(
        &self,
        model_text: &str,
        data: &[&str],
        assignments: &Bindings,
        expr: &str,
        config: &SolverConfig,
    ) -> Result<Option<f64>, HarnessError> {
        let mut model = model_text.to_string();
        model.push('\n');
        for (sym, v) in assignments.iter() {
            model.push_str(&format!("constraint {sym} = {};\n", value_to_dzn(v)));
        }
        model.push_str(&format!("output [\"\\n{OBJECTIVE_SYMBOL} = \\({expr});\\n\"];\n"));
        let mut files = vec![("eval.mzn", model.as_str())];
        let names: Vec<String> = (0..data.len()).map(|i| format!("data{i}.dzn")).collect();
        for (name, text) in names.iter().zip(data) {
            if !text.trim().is_empty() {
                files.push((name.as_str(), text));
            }
        }
        let args = vec![
            "--solver".to_string(),
            config.solver.clone(),
            "--time-limit".to_string(),
            config.time_limit.as_millis().to_string(),
        ];
        let raw = self.run_raw(&args, &files, hard_deadline(config.time_limit))?;
        let prefix = format!("{OBJECTIVE_SYMBOL} = ");
        Ok(raw
            .stdout
            .lines()
            .filter_map(|l| l.strip_prefix(&prefix))
            .filter_map(|rest| rest.trim_end_matches(';').trim().parse::<f64>().ok())
            .next_back())
    }

    /// Checks a candidate solution against a ground-truth model by fixing
    /// the declared output symbols as data. `Ok(false)` covers infeasible,
    /// ill-typed and incomplete candidates; a model that fails to compile on
    /// its own data is a corpus fault.
    pub fn verify_satisfaction(
        &self,
        ground_truth_model: &str,
        instance_data: &str,
        candidate: &Bindings,
        output_symbols: &[String],
    ) -> Result<bool, HarnessError> {
        let mut inject = Bindings::new();
        if output_symbols.is_empty() {
            inject = candidate.clone();
        } else {
            for sym in output_symbols {
                match candidate.get(sym) {
                    Some(v) => {
                        inject.insert(sym.clone(), v.clone());
                    }
                    None => return Ok(false),
                }
            }
        }
        let candidate_text = serialize(&inject);
        let r = self.solve_with(ground_truth_model, &[instance_data, &candidate_text], &self.config)?;
        match r.status {
            SolveStatus::Satisfied | SolveStatus::Optimal => Ok(true),
            SolveStatus::CompileError => {
                let mut check = self.config.clone();
                check.extra_flags.push("--instance-check-only".to_string());
                let plain = self.solve_with(ground_truth_model, &[instance_data], &check)?;
                match plain.status {
                    SolveStatus::CompileError => {
                        Err(HarnessError::VerifierCompileError(plain.error_text().to_string()))
                    }
                    _ => Ok(false),
                }
            }
            _ => Ok(false),
        }
    }
}

/// Derives a [`SolveResult`] from a finished toolchain run.
pub fn interpret(raw: &RawRun, time_limit: Duration, objective: Option<Objective>) -> SolveResult {
    let mut result = SolveResult {
        status: SolveStatus::Unknown,
        objective_value: None,
        assignments: Bindings::new(),
        error: None,
        wall_seconds: raw.wall.as_secs_f64(),
        output_parse_error: None,
        stdout: raw.stdout.clone(),
        stderr: raw.stderr.clone(),
    };
    let error_reported = !raw.killed && (raw.exit_code.is_some_and(|c| c != 0) || ERROR_LINE.is_match(&raw.stderr));
    let error_text = || {
        let t = raw.stderr.trim();
        if t.is_empty() {
            raw.stdout.trim().to_string()
        } else {
            t.to_string()
        }
    };
    let timed_out = raw.killed || raw.wall >= time_limit;
    let parsed = match parse_solution(&raw.stdout) {
        Ok(p) => p,
        Err(e) => {
            result.output_parse_error = Some(format!("{e}\n{}", e.raw));
            if error_reported {
                result.status = SolveStatus::RuntimeError;
                let raw = error_text();
                result.error = Some(SolveError {
                    category: classify_error(&raw),
                    raw,
                });
            }
            return result;
        }
    };
    if parsed.solution_count > 0 {
        if error_reported {
            result.status = SolveStatus::RuntimeError;
            let raw = error_text();
            result.error = Some(SolveError {
                category: classify_error(&raw),
                raw,
            });
            result.assignments = parsed.assignments;
            return result;
        }
        let optimization = objective.map_or(parsed.objective_value.is_some(), Objective::is_optimization);
        result.status = if optimization && parsed.verdict == Verdict::Complete {
            SolveStatus::Optimal
        } else {
            SolveStatus::Satisfied
        };
        if optimization {
            result.objective_value = parsed.objective_value;
        }
        result.assignments = parsed.assignments;
        return result;
    }
    match parsed.verdict {
        Verdict::Unsatisfiable => result.status = SolveStatus::Unsatisfiable,
        Verdict::Error => {
            result.status = SolveStatus::RuntimeError;
            let raw = error_text();
            result.error = Some(SolveError {
                category: classify_error(&raw),
                raw,
            });
        }
        _ if error_reported => {
            result.status = SolveStatus::CompileError;
            let raw = error_text();
            result.error = Some(SolveError {
                category: classify_error(&raw),
                raw,
            });
        }
        _ if timed_out => {
            result.status = SolveStatus::Timeout;
            result.error = Some(SolveError {
                category: ErrorCategory::TimeoutError,
                raw: format!("no solution within the time limit of {} ms", time_limit.as_millis()),
            });
        }
        _ => result.status = SolveStatus::Unknown,
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(stdout: &str, stderr: &str, code: i32, wall_ms: u64) -> RawRun {
        RawRun {
            stdout: stdout.into(),
            stderr: stderr.into(),
            exit_code: Some(code),
            killed: false,
            wall: Duration::from_millis(wall_ms),
        }
    }

    const LIMIT: Duration = Duration::from_secs(2);

    #[test]
    fn statuses() {
        let r = interpret(&raw("x = 2;\n----------\n", "", 0, 10), LIMIT, Some(Objective::Satisfy));
        assert_eq!(r.status, SolveStatus::Satisfied);
        assert!(r.error.is_none());
        let r = interpret(
            &raw("x = 1;\n_objective = 1;\n----------\n==========\n", "", 0, 10),
            LIMIT,
            Some(Objective::Minimize),
        );
        assert_eq!((r.status, r.objective_value), (SolveStatus::Optimal, Some(1.0)));
        let r = interpret(&raw("=====UNSATISFIABLE=====\n", "", 0, 10), LIMIT, None);
        assert_eq!(r.status, SolveStatus::Unsatisfiable);
        let r = interpret(&raw("", "Error: syntax error, unexpected where\n", 1, 10), LIMIT, None);
        assert_eq!(r.status, SolveStatus::CompileError);
        assert_eq!(r.error.unwrap().category, ErrorCategory::SyntaxError);
        let r = interpret(&raw("=====UNKNOWN=====\n", "", 0, 2100), LIMIT, None);
        assert_eq!(r.status, SolveStatus::Timeout);
        let r = interpret(&raw("=====UNKNOWN=====\n", "", 0, 100), LIMIT, None);
        assert_eq!(r.status, SolveStatus::Unknown);
        let r = interpret(&raw("c = RED;\n----------\n", "", 0, 10), LIMIT, None);
        assert_eq!(r.status, SolveStatus::Unknown);
        assert!(r.output_parse_error.is_some());
    }

    #[test]
    fn warnings_are_not_errors() {
        let stderr = "Warning: undefined result becomes false in Boolean context\n  (array access out of bounds)\n";
        let r = interpret(&raw("=====UNSATISFIABLE=====\n", stderr, 0, 10), LIMIT, None);
        assert_eq!(r.status, SolveStatus::Unsatisfiable);
    }

    #[test]
    fn satisfied_optimization_keeps_incumbent_objective() {
        let r = interpret(
            &raw("x = 4;\n_objective = 4;\n----------\n", "", 0, 2000),
            LIMIT,
            Some(Objective::Maximize),
        );
        assert_eq!((r.status, r.objective_value), (SolveStatus::Satisfied, Some(4.0)));
        // no objective is reported for satisfaction models
        let r = interpret(
            &raw("x = 4;\n----------\n==========\n", "", 0, 10),
            LIMIT,
            Some(Objective::Satisfy),
        );
        assert_eq!((r.status, r.objective_value), (SolveStatus::Satisfied, None));
    }

    #[test]
    fn solve_item_detection() {
        let m = "% solve minimize nothing;\nvar 1..3: x;\nsolve :: int_search([x], input_order, indomain_min)\n  maximize 2 * x;\n";
        assert_eq!(declared_objective(m), Some((Objective::Maximize, "2 * x".to_string())));
        assert_eq!(
            declared_objective("var bool: b;solve satisfy;").map(|d| d.0),
            Some(Objective::Satisfy)
        );
        assert_eq!(declared_objective("var int: x;"), None);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new("gecode", Duration::ZERO).is_err());
        assert!(SolverConfig::new("gecode", Duration::from_secs(1)).is_ok());
    }
}

mod common;

use std::time::{Duration, Instant};

use zincpilot_core::dzn::{parse_dzn, Value};
use zincpilot_core::harness::{parse_solution, ErrorCategory, HarnessError, SolveStatus, SolverConfig, Verdict};

use common::solver::{harness, HARD_MODEL};

#[test]
fn satisfiable_toy() {
    let r = harness().solve("var 1..3: x; solve satisfy;", "").unwrap();
    assert_eq!(r.status, SolveStatus::Satisfied);
    let x = r.assignments.get("x").and_then(Value::as_i64).unwrap();
    assert!((1..=3).contains(&x));
    assert!(r.error.is_none() && r.objective_value.is_none());
}

#[test]
fn misplaced_where_is_a_syntax_error() {
    let m = "var 1..3: x;\nconstraint forall(i in 1..3 where) (x > i);\nsolve satisfy;\n";
    let r = harness().solve(m, "").unwrap();
    assert_eq!(r.status, SolveStatus::CompileError);
    assert_eq!(r.error.unwrap().category, ErrorCategory::SyntaxError);
}

#[test]
fn missing_parameter_is_missing_data() {
    let m = "int: K;\nvar 1..K: x;\nsolve satisfy;\n";
    let r = harness().solve(m, "").unwrap();
    assert_eq!(r.status, SolveStatus::CompileError);
    let e = r.error.unwrap();
    assert_eq!(e.category, ErrorCategory::MissingData, "{}", e.raw);
    assert!(e.raw.contains("did you forget to specify a data file?"));
    assert_eq!(harness().solve(m, "K = 2;").unwrap().status, SolveStatus::Satisfied);
}

#[test]
fn optimization_reports_objective() {
    let m = "var 1..10: x; var 1..10: y;\nconstraint x + y > 4;\nsolve minimize x * y;\n";
    let r = harness().solve(m, "").unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert_eq!(r.objective_value, Some(4.0));
}

#[test]
fn unsatisfiable() {
    let r = harness()
        .solve("var 1..3: x; constraint x > 5; solve satisfy;", "")
        .unwrap();
    assert_eq!(r.status, SolveStatus::Unsatisfiable);
}

#[test]
fn objective_by_evaluation_run() {
    let m = "int: n;\narray[1..n] of var 0..5: x;\nconstraint sum(x) <= 7;\nsolve maximize sum(i in 1..n)(i * x[i]);\noutput [\"best: \\(x)\"];\n";
    let assignment = parse_dzn("x = [0, 2, 5];").unwrap();
    let v = harness().evaluate_objective(m, &["n = 3;"], &assignment).unwrap();
    assert_eq!(v, Some(19.0));
}

#[test]
fn real_output_with_two_improvements() {
    // recorded with `minizinc -a --output-mode dzn --output-objective` on the
    // model next to it
    let out = include_str!("fixtures/solver_output/two_improvements.out");
    let p = parse_solution(out).unwrap();
    assert_eq!(p.solution_count, 3);
    assert_eq!(p.verdict, Verdict::Complete);
    assert_eq!(p.objective_value, Some(1.0));
    assert_eq!(p.assignments.get("x"), Some(&Value::Int(1)));
    let model = include_str!("fixtures/solver_output/two_improvements.mzn");
    let mut cfg = harness().config().clone();
    cfg.extra_flags.push("-a".into());
    let live = harness().solve_with(model, &[], &cfg).unwrap();
    assert_eq!(live.stdout, out);
    assert_eq!(live.status, SolveStatus::Optimal);
}

#[test]
fn verifier_toy() {
    let m = "var 1..3: x; constraint x > 1; solve satisfy;";
    let out = vec!["x".to_string()];
    let h = harness();
    assert!(h
        .verify_satisfaction(m, "", &parse_dzn("x = 2;").unwrap(), &out)
        .unwrap());
    assert!(!h
        .verify_satisfaction(m, "", &parse_dzn("x = 1;").unwrap(), &out)
        .unwrap());
    // out of domain and missing output symbols are rejections, not errors
    assert!(!h
        .verify_satisfaction(m, "", &parse_dzn("x = 7;").unwrap(), &out)
        .unwrap());
    assert!(!h
        .verify_satisfaction(m, "", &parse_dzn("y = 2;").unwrap(), &out)
        .unwrap());
}

#[test]
fn broken_verifier_is_a_corpus_fault() {
    let m = "int: K;\nvar 1..K: x;\nsolve satisfy;\n";
    let err = harness()
        .verify_satisfaction(m, "", &parse_dzn("x = 1;").unwrap(), &["x".to_string()])
        .unwrap_err();
    assert!(matches!(err, HarnessError::VerifierCompileError(_)), "{err}");
}

#[test]
fn timeout_is_contained() {
    let cfg = SolverConfig::new("gecode", Duration::from_secs(2)).unwrap();
    let start = Instant::now();
    let r = harness().solve_with(HARD_MODEL, &[], &cfg).unwrap();
    let wall = start.elapsed();
    assert_eq!(r.status, SolveStatus::Timeout, "{r:?}");
    assert_eq!(r.error.unwrap().category, ErrorCategory::TimeoutError);
    assert!(wall <= Duration::from_secs(7), "{wall:?}");
}

#[test]
fn other_backends() {
    let m = "var 1..10: x; var 1..10: y;\nconstraint x + y > 4;\nsolve minimize x * y;\n";
    for solver in ["chuffed", "highs"] {
        let cfg = SolverConfig::new(solver, Duration::from_secs(30)).unwrap();
        let r = harness().solve_with(m, &[], &cfg).unwrap();
        assert_eq!(r.objective_value, Some(4.0), "{solver}: {r:?}");
    }
}

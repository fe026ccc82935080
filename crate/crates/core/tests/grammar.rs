use std::fs;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use zincpilot_core::grammar::{load_grammar, render_grammar_for_prompt, shipped_grammar, validate_syntax};

fn fixtures(kind: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/grammar")
        .join(kind);
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "mzn"))
        .collect();
    files.sort();
    files
}

#[test]
fn valid_fixtures_are_accepted() {
    let files = fixtures("valid");
    assert!(files.len() >= 20);
    for f in files {
        let d = validate_syntax(&fs::read_to_string(&f).unwrap(), shipped_grammar());
        assert!(d.is_empty(), "{}: {}", f.display(), d[0]);
    }
}

#[test]
fn invalid_fixtures_are_rejected() {
    let files = fixtures("invalid");
    assert!(files.len() >= 20);
    for f in files {
        let d = validate_syntax(&fs::read_to_string(&f).unwrap(), shipped_grammar());
        assert!(!d.is_empty(), "{} accepted", f.display());
    }
}

fn first(text: &str) -> (usize, usize, String) {
    let d = validate_syntax(text, shipped_grammar());
    let d = d.first().unwrap_or_else(|| panic!("accepted: {text}"));
    (d.line, d.column, d.found.clone())
}

#[test]
fn bool_literal_spelling() {
    assert!(validate_syntax("var bool: b = true;", shipped_grammar()).is_empty());
    assert!(validate_syntax("var bool: b = false;", shipped_grammar()).is_empty());
    for bad in ["True", "FALSE", "tRUE", "False"] {
        let text = format!("var bool: b = {bad};");
        assert_eq!(first(&text), (1, 15, bad.to_string()));
    }
    // other identifiers are untouched
    assert!(validate_syntax("var bool: b = truth;", shipped_grammar()).is_empty());
}

#[test]
fn first_diagnostic_matches_the_solver_position() {
    // positions as reported by the MiniZinc parser
    let cases = [
        ("invalid/misplaced_where.mzn", (3, 30, "where")),
        ("invalid/missing_semicolon.mzn", (3, 1, "constraint")),
        ("invalid/maximise_spelling.mzn", (3, 7, "maximise")),
        ("invalid/unterminated_string.mzn", (3, 9, "\"x = \\(x)\\n];")),
        ("invalid/binary_literal.mzn", (1, 15, "b1010")),
    ];
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/grammar");
    for (file, (line, col, found)) in cases {
        let text = fs::read_to_string(dir.join(file)).unwrap();
        assert_eq!(first(&text), (line, col, found.to_string()), "{file}");
    }
}

#[test]
fn where_message_names_the_token() {
    let d = validate_syntax("constraint forall(i in 1..3) where i > 1 (true);", shipped_grammar());
    assert!(
        d[0].message.starts_with("syntax error, unexpected where"),
        "{}",
        d[0].message
    );
    assert!(!d[0].rule_context.is_empty());
}

#[test]
fn several_errors_reported() {
    let text = "var int x;\nvar 1..3: ok;\nconstraint x > && 1;\nsolve maximise x;\n";
    let d = validate_syntax(text, shipped_grammar());
    let lines: Vec<usize> = d.iter().map(|d| d.line).collect();
    assert_eq!(lines, [1, 3, 4]);
}

#[test]
fn shipped_rendering_round_trips() {
    let g = shipped_grammar();
    let text = render_grammar_for_prompt(g);
    assert_eq!(text, render_grammar_for_prompt(g));
    let again = load_grammar(&text).unwrap();
    assert_eq!(&again, g);
    assert_eq!(render_grammar_for_prompt(&again), text);
    assert!(text.contains("<bool-literal> ::= \"false\" | \"true\""));
}

fn mzn_fragment() -> impl Strategy<Value = String> {
    let pieces = prop::sample::select(vec![
        "var",
        "int",
        ":",
        "x",
        "y",
        "=",
        "1",
        "..",
        "10",
        ";",
        "constraint",
        "forall",
        "(",
        ")",
        "[",
        "]",
        "{",
        "}",
        "i",
        "in",
        "where",
        "<",
        "+",
        ",",
        "|",
        "[|",
        "|]",
        "solve",
        "satisfy",
        "\n",
        "% c\n",
        "\"s\"",
        "#",
        "1.5",
        "let",
        "if",
        "then",
        "else",
        "endif",
        "True",
        "/\\",
    ]);
    prop::collection::vec(pieces, 0..40).prop_map(|ps| ps.join(" "))
}

fn within(text: &str, line: usize, column: usize) -> bool {
    text.split('\n')
        .nth(line.wrapping_sub(1))
        .is_some_and(|l| column >= 1 && column <= l.chars().count())
}

proptest! {
    #[test]
    fn diagnostics_point_into_the_input(text in mzn_fragment()) {
        let d = validate_syntax(&text, shipped_grammar());
        prop_assert!(d.len() <= 25);
        if !d.is_empty() {
            prop_assert!(d.iter().any(|d| within(&text, d.line, d.column)), "{:?} in {:?}", d, text);
        }
        for diag in &d {
            prop_assert!(within(&text, diag.line, diag.column), "{:?} in {:?}", diag, text);
        }
    }

    #[test]
    fn validation_is_deterministic(text in mzn_fragment()) {
        prop_assert_eq!(validate_syntax(&text, shipped_grammar()), validate_syntax(&text, shipped_grammar()));
    }

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,200}") {
        let d = validate_syntax(&text, shipped_grammar());
        for diag in &d {
            prop_assert!(within(&text, diag.line, diag.column), "{:?} in {:?}", diag, text);
        }
    }
}

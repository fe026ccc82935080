//! Grammar-driven syntax checking of MiniZinc models.
//!
//! Grammars are plain-text BNF: one rule per logical line (indented lines
//! continue the previous one), `<name> ::= alt | alt`, quoted terminals and
//! `""` for the empty alternative. Three directives configure the lexicon:
//!
//! ```text
//! @start <model>                # otherwise the first rule
//! @token <ident> identifier     # also: int, float, string
//! @strict "true" "false"        # other capitalisations are not identifiers
//! ```

mod earley;
mod lexer;

use std::fmt;
use std::sync::LazyLock;

use indexmap::IndexMap;
use serde::Serialize;

pub use earley::validate_syntax;

/// The MiniZinc grammar shipped with the crate.
pub const MINIZINC_GRAMMAR: &str = include_str!("../../assets/grammar/minizinc.bnf");

static SHIPPED: LazyLock<GrammarSpec> =
    LazyLock::new(|| load_grammar(MINIZINC_GRAMMAR).expect("shipped grammar is valid"));

/// The parsed [`MINIZINC_GRAMMAR`].
pub fn shipped_grammar() -> &'static GrammarSpec {
    &SHIPPED
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Terminal(String),
    Nonterminal(String),
}

/// A sequence of symbols; empty for the `""` alternative.
pub type Production = Vec<Symbol>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenClass {
    Identifier,
    Int,
    Float,
    String,
}

impl TokenClass {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "identifier" => Self::Identifier,
            "int" => Self::Int,
            "float" => Self::Float,
            "string" => Self::String,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Identifier => "identifier",
            Self::Int => "int",
            Self::Float => "float",
            Self::String => "string",
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Self::Identifier => "identifier",
            Self::Int => "integer literal",
            Self::Float => "float literal",
            Self::String => "string literal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarSpecError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("undefined nonterminal <{name}> referenced by <{rule}>")]
    UndefinedNonterminal { name: String, rule: String },
    #[error("grammar has no start symbol")]
    NoStartSymbol,
}

/// A validated grammar. Immutable once loaded.
#[derive(Clone)]
pub struct GrammarSpec {
    start: String,
    rules: IndexMap<String, Vec<Production>>,
    tokens: IndexMap<String, TokenClass>,
    strict: Vec<String>,
    compiled: earley::Compiled,
}

impl PartialEq for GrammarSpec {
    fn eq(&self, other: &Self) -> bool {
        self.start == other.start
            && self.rules == other.rules
            && self.tokens == other.tokens
            && self.strict == other.strict
    }
}

impl fmt::Debug for GrammarSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrammarSpec")
            .field("start", &self.start)
            .field("rules", &self.rules.len())
            .field("tokens", &self.tokens)
            .finish()
    }
}

impl GrammarSpec {
    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn rules(&self) -> &IndexMap<String, Vec<Production>> {
        &self.rules
    }

    pub fn productions(&self, nonterminal: &str) -> Option<&[Production]> {
        self.rules.get(nonterminal).map(Vec::as_slice)
    }

    pub fn token_classes(&self) -> &IndexMap<String, TokenClass> {
        &self.tokens
    }

    /// Identifier-shaped terminals; these never lex as identifiers.
    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.compiled.lexicon.keywords.iter().map(String::as_str)
    }

    pub fn operators(&self) -> impl Iterator<Item = &str> {
        self.compiled.lexicon.operators.iter().map(String::as_str)
    }
}

/// A syntax error found by [`validate_syntax`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyntaxDiagnostic {
    pub line: usize,
    pub column: usize,
    /// Offending token text, or `end of file`.
    pub found: String,
    /// Terminals that would have been accepted, in display form.
    pub expected: Vec<String>,
    /// Innermost rules that were being parsed.
    pub rule_context: Vec<String>,
    pub message: String,
}

impl fmt::Display for SyntaxDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if let Some(ctx) = self.rule_context.first() {
            write!(f, " (in <{ctx}>)")?;
        }
        Ok(())
    }
}

fn is_word(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Removes a trailing `#` comment, respecting quoted terminals.
fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_quote => escaped = true,
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

#[derive(Debug, PartialEq)]
enum Piece {
    Nt(String),
    Lit(String),
    Bar,
}

fn pieces(text: &str, line: usize) -> Result<Vec<Piece>, GrammarSpecError> {
    let bad = |message: String| GrammarSpecError::Malformed { line, message };
    let mut out = Vec::new();
    let mut cs = text.chars().peekable();
    while let Some(&c) = cs.peek() {
        match c {
            c if c.is_whitespace() => {
                cs.next();
            }
            '|' => {
                cs.next();
                out.push(Piece::Bar);
            }
            '<' => {
                cs.next();
                let name: String = cs.by_ref().take_while(|&c| c != '>').collect();
                if !is_name(&name) {
                    return Err(bad(format!("bad nonterminal name <{name}>")));
                }
                out.push(Piece::Nt(name));
            }
            '"' => {
                cs.next();
                let mut lit = String::new();
                loop {
                    match cs.next() {
                        None => return Err(bad("unterminated terminal".into())),
                        Some('"') => break,
                        Some('\\') => match cs.next() {
                            Some(e @ ('"' | '\\')) => lit.push(e),
                            Some(e) => {
                                lit.push('\\');
                                lit.push(e);
                            }
                            None => return Err(bad("unterminated terminal".into())),
                        },
                        Some(c) => lit.push(c),
                    }
                }
                if lit.chars().any(char::is_whitespace) {
                    return Err(bad(format!("terminal \"{lit}\" contains whitespace")));
                }
                out.push(Piece::Lit(lit));
            }
            other => return Err(bad(format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

fn alternatives(body: &str, line: usize) -> Result<Vec<Production>, GrammarSpecError> {
    let mut alts = vec![Vec::new()];
    for piece in pieces(body, line)? {
        match piece {
            Piece::Bar => alts.push(Vec::new()),
            other => alts.last_mut().expect("non-empty").push(other),
        }
    }
    alts.into_iter()
        .map(|alt| {
            if alt.is_empty() {
                return Err(GrammarSpecError::Malformed {
                    line,
                    message: "empty alternative (write \"\" for the empty string)".into(),
                });
            }
            if alt == [Piece::Lit(String::new())] {
                return Ok(Vec::new());
            }
            alt.into_iter()
                .map(|p| match p {
                    Piece::Nt(n) => Ok(Symbol::Nonterminal(n)),
                    Piece::Lit(l) if l.is_empty() => Err(GrammarSpecError::Malformed {
                        line,
                        message: "\"\" must be an alternative on its own".into(),
                    }),
                    Piece::Lit(l) => Ok(Symbol::Terminal(l)),
                    Piece::Bar => unreachable!(),
                })
                .collect()
        })
        .collect()
}

/// Parses and validates a grammar in the BNF exchange format.
pub fn load_grammar(spec_text: &str) -> Result<GrammarSpec, GrammarSpecError> {
    // join continuation lines, remembering where each logical line began
    let mut logical: Vec<(usize, String)> = Vec::new();
    for (i, raw) in spec_text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with(char::is_whitespace) {
            match logical.last_mut() {
                Some((_, text)) => {
                    text.push(' ');
                    text.push_str(line.trim());
                }
                None => {
                    return Err(GrammarSpecError::Malformed {
                        line: i + 1,
                        message: "continuation line without a rule".into(),
                    })
                }
            }
        } else {
            logical.push((i + 1, line.trim_end().to_string()));
        }
    }

    let mut start = None;
    let mut rules: IndexMap<String, Vec<Production>> = IndexMap::new();
    let mut tokens = IndexMap::new();
    let mut strict = Vec::new();
    for (line, text) in logical {
        let bad = |message: String| GrammarSpecError::Malformed { line, message };
        if let Some(directive) = text.strip_prefix('@') {
            let (name, rest) = directive.split_once(char::is_whitespace).unwrap_or((directive, ""));
            match name {
                "start" => match pieces(rest, line)?.as_slice() {
                    [Piece::Nt(n)] => start = Some(n.clone()),
                    _ => return Err(bad("expected `@start <name>`".into())),
                },
                "strict" => {
                    let words = pieces(rest, line)?;
                    if words.is_empty() {
                        return Err(bad("@strict takes quoted words".into()));
                    }
                    for w in words {
                        match w {
                            Piece::Lit(l) if is_word(&l) => strict.push(l),
                            _ => return Err(bad("@strict takes quoted words".into())),
                        }
                    }
                }
                "token" => {
                    let mut parts = rest.split_whitespace();
                    let (Some(nt), Some(class), None) = (parts.next(), parts.next(), parts.next()) else {
                        return Err(bad("expected `@token <name> class`".into()));
                    };
                    let nt = nt
                        .strip_prefix('<')
                        .and_then(|n| n.strip_suffix('>'))
                        .filter(|n| is_name(n))
                        .ok_or_else(|| bad(format!("bad nonterminal {nt}")))?;
                    let class =
                        TokenClass::parse(class).ok_or_else(|| bad(format!("unknown token class `{class}`")))?;
                    tokens.insert(nt.to_string(), class);
                }
                _ => return Err(bad(format!("unknown or malformed directive @{name}"))),
            }
            continue;
        }
        let (lhs, body) = text
            .split_once("::=")
            .ok_or_else(|| bad("expected `<name> ::= ...`".into()))?;
        let lhs = lhs.trim();
        let name = lhs
            .strip_prefix('<')
            .and_then(|n| n.strip_suffix('>'))
            .filter(|n| is_name(n))
            .ok_or_else(|| bad(format!("bad rule name `{lhs}`")))?;
        let alts = alternatives(body, line)?;
        rules.entry(name.to_string()).or_default().extend(alts);
    }

    let start = start
        .or_else(|| rules.keys().next().cloned())
        .ok_or(GrammarSpecError::NoStartSymbol)?;
    if !rules.contains_key(&start) {
        return Err(GrammarSpecError::UndefinedNonterminal {
            name: start,
            rule: "@start".into(),
        });
    }
    for (nt, _) in &tokens {
        if rules.contains_key(nt) {
            return Err(GrammarSpecError::Malformed {
                line: 0,
                message: format!("<{nt}> is both a token class and a rule"),
            });
        }
    }
    for (rule, prods) in &rules {
        for sym in prods.iter().flatten() {
            if let Symbol::Nonterminal(n) = sym {
                if !rules.contains_key(n) && !tokens.contains_key(n) {
                    return Err(GrammarSpecError::UndefinedNonterminal {
                        name: n.clone(),
                        rule: rule.clone(),
                    });
                }
            }
        }
    }
    let compiled = earley::Compiled::new(&start, &rules, &tokens, &strict);
    Ok(GrammarSpec {
        start,
        rules,
        tokens,
        strict,
        compiled,
    })
}

fn quote(lit: &str) -> String {
    format!("\"{}\"", lit.replace('\\', "\\\\").replace('"', "\\\""))
}

fn render_production(p: &Production) -> String {
    if p.is_empty() {
        return "\"\"".into();
    }
    p.iter()
        .map(|s| match s {
            Symbol::Terminal(t) => quote(t),
            Symbol::Nonterminal(n) => format!("<{n}>"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Deterministic BNF text for a grammar; loads back to an equal grammar.
pub fn render_grammar_for_prompt(grammar: &GrammarSpec) -> String {
    let mut out = String::new();
    if grammar.rules.keys().next() != Some(&grammar.start) {
        out.push_str(&format!("@start <{}>\n", grammar.start));
    }
    for (nt, class) in &grammar.tokens {
        out.push_str(&format!("@token <{nt}> {}\n", class.as_str()));
    }
    if !grammar.strict.is_empty() {
        let words: Vec<String> = grammar.strict.iter().map(|w| quote(w)).collect();
        out.push_str(&format!("@strict {}\n", words.join(" ")));
    }
    for (nt, prods) in &grammar.rules {
        let alts: Vec<String> = prods.iter().map(render_production).collect();
        out.push_str(&format!("<{nt}> ::= {}\n", alts.join(" | ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bool_literal_rule() {
        let g = load_grammar("<bool-literal> ::= \"false\" | \"true\"").unwrap();
        assert_eq!(g.start(), "bool-literal");
        assert_eq!(g.productions("bool-literal").unwrap().len(), 2);
        assert_eq!(render_grammar_for_prompt(&g).lines().count(), 1);
    }

    #[test]
    fn undefined_reference() {
        let err = load_grammar("<expr> ::= <expr2> \"+\" <expr>").unwrap_err();
        assert_eq!(
            err,
            GrammarSpecError::UndefinedNonterminal {
                name: "expr2".into(),
                rule: "expr".into()
            }
        );
    }

    #[test]
    fn empty_spec() {
        assert_eq!(load_grammar("").unwrap_err(), GrammarSpecError::NoStartSymbol);
        assert_eq!(
            load_grammar("# only a comment\n\n").unwrap_err(),
            GrammarSpecError::NoStartSymbol
        );
    }

    #[test]
    fn malformed_productions() {
        for bad in [
            "<a> \"x\"",
            "<a> ::= \"x",
            "<a> ::= | \"x\"",
            "<a> ::= \"x\" \"\"",
            "<a b> ::= \"x\"",
            "  <a> ::= \"x\"",
            "@token <a> number\n<b> ::= <a>",
            "@bogus\n<a> ::= \"x\"",
        ] {
            assert!(
                matches!(load_grammar(bad), Err(GrammarSpecError::Malformed { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn continuation_and_comments() {
        let g = load_grammar("<a> ::= \"#\" # hash terminal\n    | \"b\"\n<b> ::= \"\" | <a>").unwrap();
        assert_eq!(g.productions("a").unwrap().len(), 2);
        assert_eq!(g.productions("b").unwrap()[0], Vec::<Symbol>::new());
    }

    #[test]
    fn render_round_trip_with_directives() {
        let text = "@start <s>\n@token <id> identifier\n@strict \"true\"\n<t> ::= \"q\\\"\"\n<s> ::= <id> <t> | \"\"\n";
        let g = load_grammar(text).unwrap();
        let r = render_grammar_for_prompt(&g);
        assert_eq!(r, text);
        assert_eq!(load_grammar(&r).unwrap(), g);
    }

    #[test]
    fn shipped_grammar_loads() {
        let g = shipped_grammar();
        assert_eq!(g.start(), "model");
        assert!(g.keywords().any(|k| k == "constraint"));
        assert!(g.operators().any(|o| o == "/\\"));
    }
}

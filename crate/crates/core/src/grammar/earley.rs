//! Earley recognition with panic-mode recovery.

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;

use super::lexer::{lex, Kind, Lexicon, Token};
use super::{is_word, GrammarSpec, Production, Symbol, SyntaxDiagnostic, TokenClass};

/// Diagnostics reported per call, at most.
pub const MAX_DIAGNOSTICS: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Term {
    Word(String),
    Op(String),
    Class(TokenClass),
}

#[derive(Debug, Clone, Copy)]
enum Sym {
    T(u32),
    N(u32),
}

#[derive(Debug, Clone)]
pub(super) struct Compiled {
    pub lexicon: Lexicon,
    names: Vec<String>,
    prods: Vec<(u32, Vec<Sym>)>,
    by_lhs: Vec<Vec<u32>>,
    nullable: Vec<bool>,
    terms: Vec<Term>,
    start: u32,
    strict: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Item {
    prod: u32,
    dot: u32,
    origin: u32,
}

#[derive(Default)]
struct StateSet {
    items: Vec<Item>,
    seen: HashSet<Item>,
    /// Items whose next symbol is the keyed nonterminal.
    waiting: HashMap<u32, Vec<Item>>,
}

struct Failure {
    at: usize,
    expected: Vec<u32>,
    context: Vec<String>,
}

impl Compiled {
    pub(super) fn new(
        start: &str,
        rules: &IndexMap<String, Vec<Production>>,
        tokens: &IndexMap<String, TokenClass>,
        strict: &[String],
    ) -> Self {
        let names: Vec<String> = rules.keys().cloned().collect();
        let ids: HashMap<&str, u32> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i as u32)).collect();
        let mut terms: Vec<Term> = Vec::new();
        let mut term_ids: HashMap<Term, u32> = HashMap::new();
        let mut term_id = |t: Term| {
            *term_ids.entry(t.clone()).or_insert_with(|| {
                terms.push(t);
                terms.len() as u32 - 1
            })
        };
        let mut prods = Vec::new();
        let mut by_lhs = vec![Vec::new(); names.len()];
        for (lhs, alts) in rules {
            let l = ids[lhs.as_str()];
            for alt in alts {
                let rhs: Vec<Sym> = alt
                    .iter()
                    .map(|s| match s {
                        Symbol::Nonterminal(n) => match tokens.get(n) {
                            Some(&class) => Sym::T(term_id(Term::Class(class))),
                            None => Sym::N(ids[n.as_str()]),
                        },
                        Symbol::Terminal(t) if is_word(t) => Sym::T(term_id(Term::Word(t.clone()))),
                        Symbol::Terminal(t) => Sym::T(term_id(Term::Op(t.clone()))),
                    })
                    .collect();
                by_lhs[l as usize].push(prods.len() as u32);
                prods.push((l, rhs));
            }
        }

        let mut nullable = vec![false; names.len()];
        let mut changed = true;
        while changed {
            changed = false;
            for (lhs, rhs) in &prods {
                if !nullable[*lhs as usize] && rhs.iter().all(|s| matches!(*s, Sym::N(n) if nullable[n as usize])) {
                    nullable[*lhs as usize] = true;
                    changed = true;
                }
            }
        }

        let mut lexicon = Lexicon::default();
        for t in &terms {
            match t {
                Term::Word(w) => {
                    lexicon.keywords.insert(w.clone());
                }
                Term::Op(o) => lexicon.operators.push(o.clone()),
                Term::Class(_) => {}
            }
        }
        lexicon
            .operators
            .sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));

        Self {
            lexicon,
            start: ids[start],
            names,
            prods,
            by_lhs,
            nullable,
            terms,
            strict: strict.to_vec(),
        }
    }

    fn misspelled(&self, word: &str) -> Option<&str> {
        self.strict
            .iter()
            .find(|w| w.as_str() != word && w.eq_ignore_ascii_case(word))
            .map(String::as_str)
    }

    fn matches(&self, term: u32, tok: &Token) -> bool {
        match &self.terms[term as usize] {
            Term::Word(w) => tok.kind == Kind::Word && tok.text == *w,
            Term::Op(o) => tok.kind == Kind::Op && tok.text == *o,
            Term::Class(TokenClass::Identifier) => {
                tok.kind == Kind::Word
                    && !self.lexicon.keywords.contains(&tok.text)
                    && self.misspelled(&tok.text).is_none()
            }
            Term::Class(TokenClass::Int) => tok.kind == Kind::Int,
            Term::Class(TokenClass::Float) => tok.kind == Kind::Float,
            Term::Class(TokenClass::String) => tok.kind == Kind::Str,
        }
    }

    fn next_sym(&self, item: Item) -> Option<Sym> {
        self.prods[item.prod as usize].1.get(item.dot as usize).copied()
    }

    fn add(&self, set: &mut StateSet, item: Item) {
        if set.seen.insert(item) {
            set.items.push(item);
            if let Some(Sym::N(b)) = self.next_sym(item) {
                set.waiting.entry(b).or_default().push(item);
            }
        }
    }

    /// Recognises `toks[from..]` (which ends with `Eof`) as the start symbol.
    fn recognise(&self, toks: &[Token], from: usize) -> Option<Failure> {
        let n = toks.len() - 1 - from;
        let mut sets: Vec<StateSet> = (0..=n).map(|_| StateSet::default()).collect();
        for &p in &self.by_lhs[self.start as usize] {
            self.add(
                &mut sets[0],
                Item {
                    prod: p,
                    dot: 0,
                    origin: 0,
                },
            );
        }
        for k in 0..=n {
            let tok = &toks[from + k];
            let mut idx = 0;
            while idx < sets[k].items.len() {
                let item = sets[k].items[idx];
                idx += 1;
                let advanced = Item {
                    dot: item.dot + 1,
                    ..item
                };
                match self.next_sym(item) {
                    Some(Sym::N(b)) => {
                        for &p in &self.by_lhs[b as usize] {
                            self.add(
                                &mut sets[k],
                                Item {
                                    prod: p,
                                    dot: 0,
                                    origin: k as u32,
                                },
                            );
                        }
                        if self.nullable[b as usize] {
                            self.add(&mut sets[k], advanced);
                        }
                    }
                    Some(Sym::T(t)) => {
                        if k < n && self.matches(t, tok) {
                            self.add(&mut sets[k + 1], advanced);
                        }
                    }
                    None => {
                        let lhs = self.prods[item.prod as usize].0;
                        let j = item.origin as usize;
                        if j < k {
                            let waiting = sets[j].waiting.get(&lhs).cloned().unwrap_or_default();
                            for w in waiting {
                                self.add(&mut sets[k], Item { dot: w.dot + 1, ..w });
                            }
                        }
                    }
                }
            }
            let accepted = k == n
                && sets[k].items.iter().any(|it| {
                    it.origin == 0
                        && self.prods[it.prod as usize].0 == self.start
                        && it.dot as usize == self.prods[it.prod as usize].1.len()
                });
            if accepted {
                return None;
            }
            if k == n || sets[k + 1].items.is_empty() {
                return Some(self.failure(&sets[k], from + k));
            }
        }
        unreachable!("loop returns at the last set")
    }

    fn failure(&self, set: &StateSet, at: usize) -> Failure {
        let mut expected = Vec::new();
        let mut scanning: Vec<Item> = Vec::new();
        for &item in &set.items {
            if let Some(Sym::T(t)) = self.next_sym(item) {
                if !expected.contains(&t) {
                    expected.push(t);
                }
                scanning.push(item);
            }
        }
        scanning.sort_by_key(|it| std::cmp::Reverse(it.origin));
        let mut context: Vec<String> = Vec::new();
        for it in scanning {
            let name = &self.names[self.prods[it.prod as usize].0 as usize];
            if !context.contains(name) {
                context.push(name.clone());
            }
            if context.len() == 3 {
                break;
            }
        }
        Failure { at, expected, context }
    }

    fn describe_term(&self, t: u32) -> String {
        match &self.terms[t as usize] {
            Term::Word(w) => w.clone(),
            Term::Op(o) => format!("'{o}'"),
            Term::Class(c) => c.describe().to_string(),
        }
    }

    fn describe_token(&self, tok: &Token) -> String {
        match tok.kind {
            Kind::Eof => "end of file".into(),
            Kind::Invalid => format!("invalid token `{}` ({})", tok.text, tok.note.unwrap_or("invalid input")),
            Kind::Word if self.lexicon.keywords.contains(&tok.text) => tok.text.clone(),
            Kind::Word => format!("identifier `{}`", tok.text),
            Kind::Int => format!("integer literal `{}`", tok.text),
            Kind::Float => format!("float literal `{}`", tok.text),
            Kind::Str => "string literal".into(),
            Kind::Op => format!("'{}'", tok.text),
        }
    }

    fn diagnose(&self, toks: &[Token], fail: Failure) -> SyntaxDiagnostic {
        let tok = &toks[fail.at];
        let (line, column) = if tok.kind == Kind::Eof {
            // point at the last character of the final token
            toks[..fail.at]
                .last()
                .map(|t| (t.line, t.column + t.text.chars().count().saturating_sub(1)))
                .unwrap_or((tok.line, tok.column))
        } else {
            (tok.line, tok.column)
        };
        let mut expected: Vec<String> = fail.expected.iter().map(|&t| self.describe_term(t)).collect();
        expected.sort();
        expected.dedup();
        let mut message = format!("syntax error, unexpected {}", self.describe_token(tok));
        if (1..=5).contains(&expected.len()) {
            message.push_str(", expecting ");
            message.push_str(&expected.join(" or "));
        }
        if tok.kind == Kind::Word {
            if let Some(w) = self.misspelled(&tok.text) {
                message.push_str(&format!(" (did you mean `{w}`?)"));
            }
        }
        SyntaxDiagnostic {
            line,
            column,
            found: if tok.kind == Kind::Eof {
                "end of file".into()
            } else {
                tok.text.clone()
            },
            expected,
            rule_context: fail.context,
            message,
        }
    }
}

fn depth_delta(tok: &Token) -> i32 {
    match (tok.kind, tok.text.as_str()) {
        (Kind::Op, "(" | "[" | "{" | "[|") => 1,
        (Kind::Op, ")" | "]" | "}" | "|]") => -1,
        _ => 0,
    }
}

/// Index of the first token after the `;` that ends the item containing the
/// error at `at`, or `None` if the input ends first.
fn resync(toks: &[Token], from: usize, at: usize) -> Option<usize> {
    let mut depth: i32 = toks[from..at].iter().map(depth_delta).sum::<i32>().max(0);
    for (j, tok) in toks.iter().enumerate().skip(at) {
        match tok.kind {
            Kind::Eof => return None,
            Kind::Op if tok.text == ";" && depth == 0 => return Some(j + 1),
            _ => depth = (depth + depth_delta(tok)).max(0),
        }
    }
    None
}

/// Checks `model_text` against `grammar`. An empty result means the text is
/// accepted; otherwise up to [`MAX_DIAGNOSTICS`] positioned diagnostics, the
/// first one at the earliest error.
pub fn validate_syntax(model_text: &str, grammar: &GrammarSpec) -> Vec<SyntaxDiagnostic> {
    let c = &grammar.compiled;
    let toks = lex(model_text, &c.lexicon);
    let mut diags = Vec::new();
    let mut from = 0;
    while diags.len() < MAX_DIAGNOSTICS {
        let Some(fail) = c.recognise(&toks, from) else { break };
        let at = fail.at;
        diags.push(c.diagnose(&toks, fail));
        match resync(&toks, from, at) {
            Some(next) => from = next,
            None => break,
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::super::load_grammar;
    use super::*;

    const SUMS: &str = r#"
@token <num> int
@token <id> identifier
<prog> ::= "" | <stmt> ";" <prog>
<stmt> ::= <id> "=" <sum> | "let" "{" <prog> "}"
<sum> ::= <sum> "+" <atom> | <atom>
<atom> ::= <num> | <id> | "(" <sum> ")" | <opt> "x"
<opt> ::= "" | "-"
"#;

    #[test]
    fn accepts_and_rejects() {
        let g = load_grammar(SUMS).unwrap();
        assert!(validate_syntax("a = 1 + (b + 2); c = x;", &g).is_empty());
        assert!(validate_syntax("a = -x; let { b = 1; };", &g).is_empty());
        assert!(validate_syntax("", &g).is_empty());
        let d = validate_syntax("a = 1 + ;", &g);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].line, d[0].column), (1, 9));
        assert_eq!(d[0].found, ";");
        assert_eq!(d[0].rule_context[0], "atom");
        assert!(
            d[0].message.starts_with("syntax error, unexpected ';'"),
            "{}",
            d[0].message
        );
    }

    #[test]
    fn keywords_are_not_identifiers() {
        let g = load_grammar(SUMS).unwrap();
        let d = validate_syntax("let = 1;", &g);
        assert_eq!(d[0].found, "=");
    }

    #[test]
    fn resynchronises_after_semicolon() {
        let g = load_grammar(SUMS).unwrap();
        let d = validate_syntax("a = ;\nb = 2;\nc = 1 1;\nlet { d = ; e = 1; };\nf = 3", &g);
        let pos: Vec<_> = d.iter().map(|d| (d.line, d.column)).collect();
        assert_eq!(pos, [(1, 5), (3, 7), (4, 11), (5, 5)]);
        assert!(d[3].message.contains("end of file"));
    }

    #[test]
    fn diagnostics_are_capped() {
        let g = load_grammar(SUMS).unwrap();
        let d = validate_syntax(&"a = = 1;\n".repeat(40), &g);
        assert_eq!(d.len(), MAX_DIAGNOSTICS);
    }

    #[test]
    fn strict_spellings() {
        let g = load_grammar(
            "@token <id> identifier\n@strict \"true\" \"false\"\n<s> ::= <id> \"=\" <v>\n<v> ::= \"true\" | \"false\" | <id>",
        )
        .unwrap();
        assert!(validate_syntax("b = true", &g).is_empty());
        assert!(validate_syntax("b = other", &g).is_empty());
        let d = validate_syntax("b = True", &g);
        assert_eq!((d[0].column, d[0].found.as_str()), (5, "True"));
        assert!(d[0].message.contains("did you mean `true`"), "{}", d[0].message);
        assert!(!validate_syntax("TRUE = 1", &g).is_empty());
    }
}

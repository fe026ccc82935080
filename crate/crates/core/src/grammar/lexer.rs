use std::collections::BTreeSet;

/// Terminal vocabulary derived from a grammar.
#[derive(Debug, Clone, Default)]
pub(super) struct Lexicon {
    pub keywords: BTreeSet<String>,
    /// Longest first, so the first prefix match is the longest.
    pub operators: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Kind {
    /// Identifier or keyword.
    Word,
    Int,
    Float,
    Str,
    Op,
    Invalid,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(super) struct Token {
    pub kind: Kind,
    pub text: String,
    pub line: usize,
    pub column: usize,
    /// Why an `Invalid` token is invalid.
    pub note: Option<&'static str>,
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
}

impl Cursor {
    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c))
    }

    fn text_from(&self, start: usize) -> String {
        self.chars[start..self.pos].iter().collect()
    }
}

/// Splits model text into tokens. Never fails: unlexable input becomes
/// `Invalid` tokens. The last token is always `Eof`.
pub(super) fn lex(text: &str, lexicon: &Lexicon) -> Vec<Token> {
    let mut c = Cursor {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        skip_trivia(&mut c, &mut out);
        let (line, column, start) = (c.line, c.column, c.pos);
        let mut note = None;
        let kind = match c.peek(0) {
            None => {
                out.push(Token {
                    kind: Kind::Eof,
                    text: String::new(),
                    line,
                    column,
                    note: None,
                });
                return out;
            }
            Some(ch) if ch.is_ascii_alphabetic() || ch == '_' => {
                while matches!(c.peek(0), Some(ch) if ch.is_ascii_alphanumeric() || ch == '_') {
                    c.bump();
                }
                Kind::Word
            }
            Some('\'') => {
                c.bump();
                while matches!(c.peek(0), Some(ch) if ch != '\'' && ch != '\n') {
                    c.bump();
                }
                if c.peek(0) == Some('\'') {
                    c.bump();
                    Kind::Word
                } else {
                    note = Some("unterminated quoted identifier");
                    Kind::Invalid
                }
            }
            Some(ch) if ch.is_ascii_digit() => number(&mut c),
            Some('"') => {
                if string(&mut c) {
                    Kind::Str
                } else {
                    note = Some("unterminated string literal");
                    Kind::Invalid
                }
            }
            Some(_) => match lexicon.operators.iter().find(|op| c.starts_with(op)) {
                Some(op) => {
                    for _ in 0..op.chars().count() {
                        c.bump();
                    }
                    Kind::Op
                }
                None => {
                    c.bump();
                    note = Some("invalid character");
                    Kind::Invalid
                }
            },
        };
        out.push(Token {
            kind,
            text: c.text_from(start),
            line,
            column,
            note,
        });
    }
}

fn skip_trivia(c: &mut Cursor, out: &mut Vec<Token>) {
    loop {
        match c.peek(0) {
            Some(ch) if ch.is_whitespace() => {
                c.bump();
            }
            Some('%') => {
                while !matches!(c.peek(0), None | Some('\n')) {
                    c.bump();
                }
            }
            Some('/') if c.peek(1) == Some('*') => {
                let (line, column, start) = (c.line, c.column, c.pos);
                c.bump();
                c.bump();
                loop {
                    if c.starts_with("*/") {
                        c.bump();
                        c.bump();
                        break;
                    }
                    if c.bump().is_none() {
                        out.push(Token {
                            kind: Kind::Invalid,
                            text: c.text_from(start).chars().take(2).collect(),
                            line,
                            column,
                            note: Some("unterminated comment"),
                        });
                        return;
                    }
                }
            }
            _ => return,
        }
    }
}

fn number(c: &mut Cursor) -> Kind {
    let radix_digits = |ch: char, radix: u32| ch.is_digit(radix);
    if c.peek(0) == Some('0') {
        let radix = match c.peek(1) {
            Some('x') => Some(16),
            Some('o') => Some(8),
            _ => None,
        };
        if let Some(r) = radix {
            if matches!(c.peek(2), Some(d) if radix_digits(d, r)) {
                c.bump();
                c.bump();
                while matches!(c.peek(0), Some(d) if radix_digits(d, r)) {
                    c.bump();
                }
                return Kind::Int;
            }
        }
    }
    while matches!(c.peek(0), Some(d) if d.is_ascii_digit()) {
        c.bump();
    }
    let mut kind = Kind::Int;
    if c.peek(0) == Some('.') && matches!(c.peek(1), Some(d) if d.is_ascii_digit()) {
        c.bump();
        while matches!(c.peek(0), Some(d) if d.is_ascii_digit()) {
            c.bump();
        }
        kind = Kind::Float;
    }
    if matches!(c.peek(0), Some('e' | 'E')) {
        let sign = usize::from(matches!(c.peek(1), Some('+' | '-')));
        if matches!(c.peek(1 + sign), Some(d) if d.is_ascii_digit()) {
            for _ in 0..=sign {
                c.bump();
            }
            while matches!(c.peek(0), Some(d) if d.is_ascii_digit()) {
                c.bump();
            }
            kind = Kind::Float;
        }
    }
    kind
}

/// Consumes a string literal including `\( .. )` interpolations. Returns
/// false if it is unterminated.
fn string(c: &mut Cursor) -> bool {
    c.bump();
    loop {
        if c.peek(0) == Some('\n') {
            return false;
        }
        match c.bump() {
            None => return false,
            Some('"') => return true,
            Some('\\') => match c.bump() {
                Some('(') => {
                    let mut depth = 1;
                    while depth > 0 {
                        match c.peek(0) {
                            None | Some('\n') => return false,
                            Some('"') => {
                                if !string(c) {
                                    return false;
                                }
                            }
                            Some(ch) => {
                                c.bump();
                                match ch {
                                    '(' => depth += 1,
                                    ')' => depth -= 1,
                                    _ => {}
                                }
                            }
                        }
                    }
                }
                None => return false,
                Some(_) => {}
            },
            Some(_) => {}
        }
    }
}

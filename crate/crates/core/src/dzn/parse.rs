use super::value::{Array, Bindings, IndexRange, IntSet, Value};
use super::DznError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    /// Magnitude; the sign is a separate token.
    Int(u64),
    Float(f64),
    Str(String),
    Eq,
    Semi,
    Comma,
    LBracket,
    RBracket,
    LBracketBar,
    BarRBracket,
    Bar,
    LBrace,
    RBrace,
    LParen,
    RParen,
    DotDot,
    Minus,
    Plus,
    Other(char),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(i) => format!("integer `{i}`"),
            Tok::Float(x) => format!("float `{x}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Eq => "`=`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LBracketBar => "`[|`".into(),
            Tok::BarRBracket => "`|]`".into(),
            Tok::Bar => "`|`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::DotDot => "`..`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Other(c) => format!("`{c}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, column: usize, message: impl Into<String>) -> DznError {
        DznError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) -> Result<(), DznError> {
        loop {
            match self.chars.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('%') => {
                    while let Some(&c) = self.chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some('/') => {
                    let (line, column) = (self.line, self.column);
                    let mut look = self.chars.clone();
                    look.next();
                    if look.peek() != Some(&'*') {
                        return Ok(());
                    }
                    self.bump();
                    self.bump();
                    let mut prev = '\0';
                    loop {
                        match self.bump() {
                            Some('/') if prev == '*' => break,
                            Some(c) => prev = c,
                            None => return Err(self.error(line, column, "unterminated block comment")),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn tokenize(mut self) -> Result<Vec<Spanned>, DznError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let (line, column) = (self.line, self.column);
            let Some(&c) = self.chars.peek() else {
                out.push(Spanned {
                    tok: Tok::Eof,
                    line,
                    column,
                });
                return Ok(out);
            };
            let tok = if c.is_ascii_alphabetic() || c == '_' {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            } else if c.is_ascii_digit() {
                self.number(line, column)?
            } else if c == '"' {
                self.string(line, column)?
            } else {
                self.bump();
                match c {
                    '=' => Tok::Eq,
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    '[' => {
                        if self.chars.peek() == Some(&'|') {
                            self.bump();
                            Tok::LBracketBar
                        } else {
                            Tok::LBracket
                        }
                    }
                    ']' => Tok::RBracket,
                    '|' => {
                        if self.chars.peek() == Some(&']') {
                            self.bump();
                            Tok::BarRBracket
                        } else {
                            Tok::Bar
                        }
                    }
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '-' => Tok::Minus,
                    '+' => Tok::Plus,
                    '.' if self.chars.peek() == Some(&'.') => {
                        self.bump();
                        Tok::DotDot
                    }
                    other => Tok::Other(other),
                }
            };
            out.push(Spanned { tok, line, column });
        }
    }

    fn number(&mut self, line: usize, column: usize) -> Result<Tok, DznError> {
        let mut s = String::new();
        let mut is_float = false;
        let first = self.bump().unwrap_or('0');
        s.push(first);
        if first == '0' && matches!(self.chars.peek(), Some('x' | 'o' | 'b')) {
            let radix_char = self.bump().unwrap_or('x');
            let radix = match radix_char {
                'x' => 16,
                'o' => 8,
                _ => 2,
            };
            let mut digits = String::new();
            while let Some(&c) = self.chars.peek() {
                if c.is_digit(radix) {
                    digits.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            return u64::from_str_radix(&digits, radix)
                .map(Tok::Int)
                .map_err(|_| self.error(line, column, format!("invalid integer literal `0{radix_char}{digits}`")));
        }
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_digit() {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        // `1..3` is a range, not the float `1.`
        if self.chars.peek() == Some(&'.') {
            let mut look = self.chars.clone();
            look.next();
            if look.peek().is_some_and(|c| c.is_ascii_digit()) {
                is_float = true;
                s.push('.');
                self.bump();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
        }
        if matches!(self.chars.peek(), Some('e' | 'E')) {
            let mut look = self.chars.clone();
            look.next();
            let mut ok = look.peek().is_some_and(|c| c.is_ascii_digit());
            if !ok && matches!(look.peek(), Some('+' | '-')) {
                look.next();
                ok = look.peek().is_some_and(|c| c.is_ascii_digit());
            }
            if ok {
                is_float = true;
                s.push('e');
                self.bump();
                if let Some(&sign @ ('+' | '-')) = self.chars.peek() {
                    s.push(sign);
                    self.bump();
                }
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
        }
        if is_float {
            s.parse::<f64>()
                .map(Tok::Float)
                .map_err(|_| self.error(line, column, format!("invalid float literal `{s}`")))
        } else {
            s.parse::<u64>()
                .map(Tok::Int)
                .map_err(|_| self.error(line, column, format!("integer literal `{s}` out of range")))
        }
    }

    fn string(&mut self, line: usize, column: usize) -> Result<Tok, DznError> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.error(line, column, "unterminated string literal")),
                Some('"') => return Ok(Tok::Str(s)),
                Some('\\') => {
                    let (l, c) = (self.line, self.column);
                    match self.bump() {
                        Some('n') => s.push('\n'),
                        Some('t') => s.push('\t'),
                        Some('r') => s.push('\r'),
                        Some('"') => s.push('"'),
                        Some('\\') => s.push('\\'),
                        Some('(') => {
                            return Err(self.error(l, c, "string interpolation is not supported in data files"))
                        }
                        Some(other) => return Err(self.error(l, c, format!("unknown escape `\\{other}`"))),
                        None => return Err(self.error(line, column, "unterminated string literal")),
                    }
                }
                Some(c) => s.push(c),
            }
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> DznError {
        let t = &self.toks[self.pos];
        DznError::Parse {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn unexpected(&self, expected: &str) -> DznError {
        self.error_here(format!("unexpected {}, expected {expected}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), DznError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn items(&mut self) -> Result<Bindings, DznError> {
        let mut bindings = Bindings::new();
        loop {
            match self.peek().clone() {
                Tok::Eof => return Ok(bindings),
                Tok::Semi => {
                    self.next();
                }
                Tok::Ident(name) => {
                    self.next();
                    self.expect(Tok::Eq, "`=` after the symbol name")?;
                    let value = self.value()?;
                    if bindings.insert(name.clone(), value).is_some() {
                        return Err(DznError::DuplicateBinding(name));
                    }
                    match self.peek() {
                        Tok::Semi => {
                            self.next();
                        }
                        Tok::Eof => {}
                        _ => return Err(self.unexpected("`;` after the value")),
                    }
                }
                _ => return Err(self.unexpected("an assignment `name = value;`")),
            }
        }
    }

    /// Applies the sign to a magnitude token and consumes it.
    fn int_value(&mut self, magnitude: u64, negative: bool) -> Result<i64, DznError> {
        let v = if negative {
            -(magnitude as i128)
        } else {
            magnitude as i128
        };
        let v = i64::try_from(v).map_err(|_| self.error_here(format!("integer literal `{v}` out of range")))?;
        self.next();
        Ok(v)
    }

    fn signed_number(&mut self) -> Result<Option<Value>, DznError> {
        let negative = match self.peek() {
            Tok::Minus => {
                self.next();
                true
            }
            Tok::Plus => {
                self.next();
                false
            }
            _ => {
                return Ok(match self.peek().clone() {
                    Tok::Int(i) => Some(Value::Int(self.int_value(i, false)?)),
                    Tok::Float(x) => {
                        self.next();
                        Some(Value::Float(x))
                    }
                    _ => None,
                })
            }
        };
        match self.peek().clone() {
            Tok::Int(i) => Ok(Some(Value::Int(self.int_value(i, negative)?))),
            Tok::Float(x) => {
                self.next();
                Ok(Some(Value::Float(if negative { -x } else { x })))
            }
            Tok::Ident(s) if s == "infinity" => {
                self.next();
                Ok(Some(Value::Float(if negative {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                })))
            }
            _ => Err(self.unexpected("a number after the sign")),
        }
    }

    fn int(&mut self, what: &str) -> Result<i64, DznError> {
        match self.signed_number()? {
            Some(Value::Int(i)) => Ok(i),
            _ => Err(self.unexpected(what)),
        }
    }

    /// Scalars, sets and ranges: everything allowed as an array element.
    fn element(&mut self) -> Result<Value, DznError> {
        if let Some(num) = self.signed_number()? {
            if let Value::Int(lo) = num {
                if *self.peek() == Tok::DotDot {
                    self.next();
                    let hi = self.int("an integer upper bound")?;
                    return Ok(Value::Set(IntSet::from_range(lo, hi)));
                }
            }
            return Ok(num);
        }
        match self.peek().clone() {
            Tok::Str(s) => {
                self.next();
                Ok(Value::Str(s))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.next();
                Ok(Value::Bool(s == "true"))
            }
            Tok::Ident(s) if s == "infinity" => {
                self.next();
                Ok(Value::Float(f64::INFINITY))
            }
            Tok::LBrace => self.set_literal(),
            Tok::Ident(s) => Err(self.error_here(format!(
                "unsupported value `{s}`: enum constants and identifiers are not supported in data files"
            ))),
            Tok::Other('<') if *self.peek_at(1) == Tok::Other('>') => {
                Err(self.error_here("unsupported value `<>`: optional (absent) values are not supported"))
            }
            _ => Err(self.unexpected("a value")),
        }
    }

    fn value(&mut self) -> Result<Value, DznError> {
        match self.peek().clone() {
            Tok::LBracket => self.array_1d(),
            Tok::LBracketBar => self.array_2d(),
            Tok::Ident(name) if *self.peek_at(1) == Tok::LParen => self.array_nd(&name),
            _ => self.element(),
        }
    }

    fn set_literal(&mut self) -> Result<Value, DznError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut members = Vec::new();
        loop {
            if *self.peek() == Tok::RBrace {
                self.next();
                break;
            }
            let start = self.pos;
            let m = match self.signed_number()? {
                Some(Value::Int(i)) => i,
                Some(_) => {
                    self.pos = start;
                    return Err(self.error_here("only sets of integers are supported"));
                }
                None => {
                    return Err(match self.peek() {
                        Tok::Ident(s) => self.error_here(format!(
                            "unsupported set member `{s}`: only sets of integers are supported"
                        )),
                        _ => self.unexpected("an integer set member"),
                    })
                }
            };
            members.push(m);
            match self.peek() {
                Tok::Comma => {
                    self.next();
                }
                Tok::RBrace => {}
                _ => return Err(self.unexpected("`,` or `}`")),
            }
        }
        Ok(Value::Set(IntSet::from_members(members)))
    }

    fn element_list(&mut self, terminators: &[Tok]) -> Result<Vec<Value>, DznError> {
        let mut elems = Vec::new();
        loop {
            if terminators.contains(self.peek()) {
                return Ok(elems);
            }
            if matches!(self.peek(), Tok::LBracket | Tok::LBracketBar) {
                return Err(self.error_here("nested array literals are not supported"));
            }
            elems.push(self.element()?);
            match self.peek() {
                Tok::Comma => {
                    self.next();
                }
                t if terminators.contains(t) => {}
                _ => return Err(self.unexpected("`,` or the end of the array")),
            }
        }
    }

    fn array_1d(&mut self) -> Result<Value, DznError> {
        self.expect(Tok::LBracket, "`[`")?;
        let elems = self.element_list(&[Tok::RBracket])?;
        self.expect(Tok::RBracket, "`]`")?;
        Ok(Value::Array(
            Array::from_elements(elems).expect("1-D arrays are always well-shaped"),
        ))
    }

    fn array_2d(&mut self) -> Result<Value, DznError> {
        let open = self.pos;
        self.expect(Tok::LBracketBar, "`[|`")?;
        if matches!(self.peek(), Tok::Bar) {
            return Err(
                self.error_here("3-D array literals are not supported; use array3d(...) or restructure the data")
            );
        }
        if *self.peek() == Tok::BarRBracket {
            self.next();
            let arr =
                Array::new(vec![IndexRange::one_based(0), IndexRange::one_based(0)], vec![]).expect("empty 2-D array");
            return Ok(Value::Array(arr));
        }
        let mut rows: Vec<Vec<Value>> = Vec::new();
        loop {
            let row = self.element_list(&[Tok::Bar, Tok::BarRBracket])?;
            rows.push(row);
            match self.next().tok {
                Tok::Bar => {
                    // a trailing `|` before `|]` is tolerated
                    if *self.peek() == Tok::BarRBracket {
                        self.next();
                        break;
                    }
                }
                Tok::BarRBracket => break,
                _ => unreachable!("element_list stops only at row terminators"),
            }
        }
        let cols = rows[0].len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            let t = &self.toks[open];
            return Err(DznError::Parse {
                line: t.line,
                column: t.column,
                message: format!(
                    "ragged 2-D array: row 1 has {cols} elements but row {} has {}",
                    i + 1,
                    r.len()
                ),
            });
        }
        let dims = vec![IndexRange::one_based(rows.len()), IndexRange::one_based(cols)];
        let elems: Vec<Value> = rows.into_iter().flatten().collect();
        Ok(Value::Array(Array::new(dims, elems).expect("rectangular rows")))
    }

    fn index_range(&mut self) -> Result<IndexRange, DznError> {
        if *self.peek() == Tok::LBrace && *self.peek_at(1) == Tok::RBrace {
            self.next();
            self.next();
            return Ok(IndexRange::one_based(0));
        }
        let lo = self.int("an index range `lo..hi`")?;
        self.expect(Tok::DotDot, "`..` in the index range")?;
        let hi = self.int("an integer upper bound")?;
        Ok(IndexRange::new(lo, hi))
    }

    fn array_nd(&mut self, name: &str) -> Result<Value, DznError> {
        let n: usize = name
            .strip_prefix("array")
            .and_then(|rest| rest.strip_suffix('d'))
            .and_then(|d| d.parse().ok())
            .filter(|n| (1..=6).contains(n))
            .ok_or_else(|| self.error_here(format!("unsupported function call `{name}(...)` in data file")))?;
        let call = self.pos;
        self.next();
        self.expect(Tok::LParen, "`(`")?;
        let mut dims = Vec::with_capacity(n);
        for _ in 0..n {
            dims.push(self.index_range()?);
            self.expect(Tok::Comma, "`,` after the index range")?;
        }
        let elems = match self.value()? {
            Value::Array(a) => a.into_parts().1,
            _ => return Err(self.error_here("expected an array literal as the last argument")),
        };
        self.expect(Tok::RParen, "`)`")?;
        Array::new(dims, elems).map(Value::Array).map_err(|e| {
            let t = &self.toks[call];
            DznError::Parse {
                line: t.line,
                column: t.column,
                message: format!("{name}: {e}"),
            }
        })
    }
}

/// Parses DZN text into bindings.
pub fn parse_dzn(text: &str) -> Result<Bindings, DznError> {
    let toks = Lexer::new(text).tokenize()?;
    Parser { toks, pos: 0 }.items()
}

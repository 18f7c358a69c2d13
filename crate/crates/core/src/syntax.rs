//! Tokenizer and recursive-descent expression parser shared by the identity
//! catalogue and the radical registry.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' exponent)?
//! primary := INT | SYMBOL | 'sqrt' '(' expr ')' | '(' expr ')'
//! exponent:= INT | '-' INT | '(' '-'? INT ('/' INT)? ')'
//! ```

use std::fmt;

use num_rational::Rational64;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Punct(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Punct(c) => write!(f, "`{c}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

/// Splits `text` into tokens. `#` starts a comment running to end of line.
pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let err = |message: String| SyntaxError { line: tl, column: tc, message };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<i64>().map_err(|_| err(format!("integer literal `{s}` out of range")))?;
            Tok::Int(v)
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c == '"' {
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(err("unterminated string".into()));
            }
            i += 1;
            Tok::Str(chars[start + 1..i - 1].iter().collect())
        } else if "+-*/^(){};:=,".contains(c) {
            i += 1;
            Tok::Punct(c)
        } else {
            return Err(err(format!("unexpected character `{c}`")));
        };
        col += i - start;
        out.push(Token { tok, line: tl, column: tc });
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

pub(crate) struct TokenStream {
    tokens: Vec<Token>,
    pos: usize,
}

impl TokenStream {
    pub fn new(text: &str) -> Result<Self, SyntaxError> {
        Ok(TokenStream { tokens: tokenize(text)?, pos: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    pub fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    pub fn next(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        let t = &self.tokens[self.pos];
        SyntaxError { line: t.line, column: t.column, message: message.into() }
    }

    pub fn eat_punct(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Punct(c) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn expect_punct(&mut self, c: char) -> Result<(), SyntaxError> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`, found {}", self.peek())))
        }
    }

    pub fn expect_ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {other}"))),
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            other => Err(self.error(format!("expected `{kw}`, found {other}"))),
        }
    }

    pub fn expect_int(&mut self) -> Result<i64, SyntaxError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(v)
            }
            other => Err(self.error(format!("expected integer, found {other}"))),
        }
    }

    pub fn expect_eof(&mut self) -> Result<(), SyntaxError> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", self.peek())))
        }
    }

    /// `INT | '-' INT | '(' '-'? INT ('/' INT)? ')'`
    pub fn parse_exponent(&mut self) -> Result<Rational64, SyntaxError> {
        if self.eat_punct('-') {
            return Ok(Rational64::from_integer(-self.expect_int()?));
        }
        if let Tok::Int(_) = self.peek() {
            return Ok(Rational64::from_integer(self.expect_int()?));
        }
        if !self.eat_punct('(') {
            return Err(self.error(format!("expected exponent, found {}", self.peek())));
        }
        let neg = self.eat_punct('-');
        let num = self.expect_int()?;
        let den = if self.eat_punct('/') { self.expect_int()? } else { 1 };
        if den == 0 {
            return Err(self.error("zero denominator in exponent"));
        }
        self.expect_punct(')')?;
        Ok(Rational64::new(if neg { -num } else { num }, den))
    }
}

// ---------------------------------------------------------------------------
// expression trees
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Sym(char),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Rational64),
    Sqrt(Box<Expr>),
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ExprConfig {
    pub symbols: &'static [char],
    pub allow_sqrt: bool,
    pub allow_fractional_exponents: bool,
}

pub(crate) fn parse_expr(ts: &mut TokenStream, cfg: &ExprConfig) -> Result<Expr, SyntaxError> {
    let mut lhs = parse_term(ts, cfg)?;
    loop {
        if ts.eat_punct('+') {
            lhs = Expr::Add(Box::new(lhs), Box::new(parse_term(ts, cfg)?));
        } else if ts.eat_punct('-') {
            lhs = Expr::Sub(Box::new(lhs), Box::new(parse_term(ts, cfg)?));
        } else {
            return Ok(lhs);
        }
    }
}

fn parse_term(ts: &mut TokenStream, cfg: &ExprConfig) -> Result<Expr, SyntaxError> {
    let mut lhs = parse_unary(ts, cfg)?;
    loop {
        if ts.eat_punct('*') {
            lhs = Expr::Mul(Box::new(lhs), Box::new(parse_unary(ts, cfg)?));
        } else if ts.eat_punct('/') {
            lhs = Expr::Div(Box::new(lhs), Box::new(parse_unary(ts, cfg)?));
        } else {
            return Ok(lhs);
        }
    }
}

fn parse_unary(ts: &mut TokenStream, cfg: &ExprConfig) -> Result<Expr, SyntaxError> {
    if ts.eat_punct('-') {
        return Ok(Expr::Neg(Box::new(parse_unary(ts, cfg)?)));
    }
    let base = parse_primary(ts, cfg)?;
    if ts.eat_punct('^') {
        let exp = ts.parse_exponent()?;
        if !cfg.allow_fractional_exponents && !exp.is_integer() {
            return Err(ts.error(format!("exponent {exp} must be an integer here")));
        }
        if !exp.is_integer() && matches!(base, Expr::Neg(_)) {
            return Err(ts.error("negative base under a fractional power"));
        }
        return Ok(Expr::Pow(Box::new(base), exp));
    }
    Ok(base)
}

fn parse_primary(ts: &mut TokenStream, cfg: &ExprConfig) -> Result<Expr, SyntaxError> {
    match ts.peek().clone() {
        Tok::Int(v) => {
            ts.next();
            Ok(Expr::Int(v))
        }
        Tok::Punct('(') => {
            ts.next();
            let e = parse_expr(ts, cfg)?;
            ts.expect_punct(')')?;
            Ok(e)
        }
        Tok::Ident(name) if name == "sqrt" && cfg.allow_sqrt => {
            ts.next();
            ts.expect_punct('(')?;
            let e = parse_expr(ts, cfg)?;
            ts.expect_punct(')')?;
            if matches!(e, Expr::Neg(_)) {
                return Err(ts.error("negative base under a fractional power"));
            }
            Ok(Expr::Sqrt(Box::new(e)))
        }
        Tok::Ident(name) => {
            let mut chars = name.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) if cfg.symbols.contains(&c) => {
                    ts.next();
                    Ok(Expr::Sym(c))
                }
                _ => Err(ts.error(format!("unknown symbol `{name}`"))),
            }
        }
        other => Err(ts.error(format!("expected an operand, found {other}"))),
    }
}

// ---------------------------------------------------------------------------
// canonical rendering
// ---------------------------------------------------------------------------

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        Expr::Int(_) | Expr::Sym(_) | Expr::Sqrt(_) => 5,
    }
}

fn render_exponent(r: &Rational64) -> String {
    if r.is_integer() && *r.numer() >= 0 {
        r.numer().to_string()
    } else if r.is_integer() {
        format!("({})", r.numer())
    } else {
        format!("({}/{})", r.numer(), r.denom())
    }
}

/// Renders with the fewest parentheses that parse back to the same tree.
pub fn render(e: &Expr) -> String {
    let wrap = |child: &Expr, min: u8| {
        let s = render(child);
        if precedence(child) < min {
            format!("({s})")
        } else {
            s
        }
    };
    match e {
        Expr::Int(v) => v.to_string(),
        Expr::Sym(c) => c.to_string(),
        Expr::Sqrt(inner) => format!("sqrt({})", render(inner)),
        Expr::Neg(inner) => format!("-{}", wrap(inner, 3)),
        Expr::Add(a, b) => format!("{}+{}", wrap(a, 1), wrap(b, 2)),
        Expr::Sub(a, b) => format!("{}-{}", wrap(a, 1), wrap(b, 2)),
        Expr::Mul(a, b) => format!("{}*{}", wrap(a, 2), wrap(b, 3)),
        Expr::Div(a, b) => format!("{}/{}", wrap(a, 2), wrap(b, 3)),
        Expr::Pow(base, r) => format!("{}^{}", wrap(base, 5), render_exponent(r)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

impl Expr {
    pub fn depth(&self) -> usize {
        match self {
            Expr::Int(_) | Expr::Sym(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sqrt(a) => 1 + a.depth(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Replaces the first integer literal equal to `from` (pre-order).
    pub fn replace_first_int(&self, from: i64, to: i64) -> Option<Expr> {
        fn go(e: &Expr, from: i64, to: i64, done: &mut bool) -> Expr {
            if *done {
                return e.clone();
            }
            let b = |x: &Expr, done: &mut bool| Box::new(go(x, from, to, done));
            match e {
                Expr::Int(v) if *v == from => {
                    *done = true;
                    Expr::Int(to)
                }
                Expr::Int(_) | Expr::Sym(_) => e.clone(),
                Expr::Neg(a) => Expr::Neg(b(a, done)),
                Expr::Sqrt(a) => Expr::Sqrt(b(a, done)),
                Expr::Pow(a, r) => Expr::Pow(b(a, done), *r),
                Expr::Add(x, y) => {
                    let l = b(x, done);
                    Expr::Add(l, b(y, done))
                }
                Expr::Sub(x, y) => {
                    let l = b(x, done);
                    Expr::Sub(l, b(y, done))
                }
                Expr::Mul(x, y) => {
                    let l = b(x, done);
                    Expr::Mul(l, b(y, done))
                }
                Expr::Div(x, y) => {
                    let l = b(x, done);
                    Expr::Div(l, b(y, done))
                }
            }
        }
        let mut done = false;
        let out = go(self, from, to, &mut done);
        done.then_some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RADICAL: ExprConfig = ExprConfig { symbols: &[], allow_sqrt: true, allow_fractional_exponents: true };
    const RELATION: ExprConfig = ExprConfig { symbols: &['P', 'Q'], allow_sqrt: false, allow_fractional_exponents: false };

    fn parse(text: &str, cfg: &ExprConfig) -> Result<Expr, SyntaxError> {
        let mut ts = TokenStream::new(text)?;
        let e = parse_expr(&mut ts, cfg)?;
        ts.expect_eof()?;
        Ok(e)
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse("1-2-3", &RADICAL).unwrap();
        assert_eq!(render(&e), "1-2-3");
        assert!(matches!(e, Expr::Sub(ref a, _) if matches!(**a, Expr::Sub(..))));
        let e = parse("1-(2-3)", &RADICAL).unwrap();
        assert_eq!(render(&e), "1-(2-3)");
        let e = parse("-2^2", &RADICAL).unwrap();
        assert_eq!(e, Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Int(2)), 2.into()))));
    }

    #[test]
    fn relation_symbols_and_errors() {
        let e = parse("P*Q+9/(P*Q)", &RELATION).unwrap();
        assert_eq!(render(&e), "P*Q+9/(P*Q)");
        let err = parse("P*R", &RELATION).unwrap_err();
        assert_eq!((err.line, err.column), (1, 3));
        assert!(parse("P^(1/2)", &RELATION).is_err());
        assert!(parse("sqrt(P)", &RELATION).is_err());
    }

    #[test]
    fn negative_base_rejected() {
        assert!(parse("(-2)^(1/2)", &RADICAL).is_err());
        assert!(parse("sqrt(-2)", &RADICAL).is_err());
        assert!(parse("(-2)^2", &RADICAL).is_ok());
    }

    #[test]
    fn positions_are_tracked_across_lines() {
        let err = parse("1+\n  2 $", &RADICAL).unwrap_err();
        assert_eq!((err.line, err.column), (2, 5));
    }

    #[test]
    fn replace_first_literal() {
        let e = parse("9/(P*Q)+9", &RELATION).unwrap();
        assert_eq!(render(&e.replace_first_int(9, 8).unwrap()), "8/(P*Q)+9");
        assert!(e.replace_first_int(7, 8).is_none());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![(0i64..50).prop_map(Expr::Int), prop::sample::select(vec!['P', 'Q']).prop_map(Expr::Sym)];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                (inner, -4i64..6).prop_map(|(a, k)| Expr::Pow(Box::new(a), k.into())),
            ]
        })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(e in arb_expr()) {
            let text = render(&e);
            let back = parse(&text, &RELATION).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}

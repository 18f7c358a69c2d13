//! Eta quotients, the identity catalogue and its dual verifier.
//!
//! Catalogue grammar, one record per block (`#` starts a comment):
//!
//! ```text
//! identity <id> {
//!   P = q^(a/b) * f(k)^e * fp(k)^e / f(k) ... ;
//!   Q = ... ;
//!   relation: <expr in P, Q> = <expr in P, Q> ;
//!   source: "<tag>"
//! }
//! ```
//!
//! `f(k)` is `f(-q^k)` and `fp(k)` is `f(q^k)`. Relations may divide only by
//! monomials, so that clearing denominators yields an integer polynomial.

mod poly;
mod verify;

use std::collections::HashSet;
use std::fmt;

use num_rational::Rational64;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::blocks::Sign;
use crate::exactseries::LATTICE;
use crate::syntax::{parse_expr, render, Expr, ExprConfig, SyntaxError, Tok, TokenStream};

pub use poly::IntPoly;
pub use verify::{
    natural_nome_index, probe_points, verify_multiplier13, verify_numeric, verify_series, Multiplier13Report,
    ProbePoint, Residual, SeriesFailure, SeriesReport, Verdict, VerifyError, PROBES,
};

const RELATION: ExprConfig = ExprConfig { symbols: &['P', 'Q'], allow_sqrt: false, allow_fractional_exponents: false };

/// `f(-q^k)^exponent` for `Sign::Minus`, `f(q^k)^exponent` for `Sign::Plus`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct EtaFactor {
    pub k: u32,
    pub sign: Sign,
    pub exponent: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum QuotientError {
    #[error("factor index k must be positive")]
    ZeroIndex,
    #[error("q-power {0} is not a multiple of 1/24")]
    OffLattice(Rational64),
    #[error("exponent overflow")]
    Overflow,
}

/// `q^q_power * Π f(∓q^k)^e`, normalised: factors sorted by `(k, sign)`,
/// merged, zero exponents dropped.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EtaQuotient {
    factors: Vec<EtaFactor>,
    q_power: Rational64,
}

impl EtaQuotient {
    pub fn new<I>(factors: I, q_power: Rational64) -> Result<Self, QuotientError>
    where
        I: IntoIterator<Item = EtaFactor>,
    {
        if !(q_power * Rational64::from_integer(LATTICE)).is_integer() {
            return Err(QuotientError::OffLattice(q_power));
        }
        let mut merged: Vec<EtaFactor> = Vec::new();
        let mut all: Vec<EtaFactor> = factors.into_iter().collect();
        if all.iter().any(|f| f.k == 0) {
            return Err(QuotientError::ZeroIndex);
        }
        all.sort_by_key(|f| (f.k, f.sign));
        for f in all {
            match merged.last_mut() {
                Some(last) if last.k == f.k && last.sign == f.sign => {
                    last.exponent = last.exponent.checked_add(f.exponent).ok_or(QuotientError::Overflow)?;
                }
                _ => merged.push(f),
            }
        }
        merged.retain(|f| f.exponent != 0);
        Ok(EtaQuotient { factors: merged, q_power })
    }

    pub fn one() -> Self {
        EtaQuotient { factors: Vec::new(), q_power: Rational64::zero() }
    }

    pub fn factors(&self) -> &[EtaFactor] {
        &self.factors
    }

    pub fn q_power(&self) -> Rational64 {
        self.q_power
    }

    /// The q-power as a lattice exponent.
    pub fn lattice_shift(&self) -> i64 {
        (self.q_power * Rational64::from_integer(LATTICE)).to_integer()
    }

    pub fn max_index(&self) -> u32 {
        self.factors.iter().map(|f| f.k).max().unwrap_or(1)
    }

    /// Parses `q^(a/b) * f(k)^e / fp(k) ...`, or `1`.
    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        let mut ts = TokenStream::new(text)?;
        let q = parse_quotient(&mut ts)?;
        ts.expect_eof()?;
        Ok(q)
    }
}

impl fmt::Display for EtaQuotient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let qp = self.q_power;
        if !qp.is_zero() {
            parts.push(if qp == Rational64::from_integer(1) {
                "q".to_string()
            } else if qp.is_integer() {
                format!("q^{}", qp.numer())
            } else {
                format!("q^({}/{})", qp.numer(), qp.denom())
            });
        }
        for fac in &self.factors {
            let name = match fac.sign {
                Sign::Minus => "f",
                Sign::Plus => "fp",
            };
            parts.push(if fac.exponent == 1 {
                format!("{name}({})", fac.k)
            } else {
                format!("{name}({})^{}", fac.k, fac.exponent)
            });
        }
        if parts.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&parts.join(" * "))
        }
    }
}

fn parse_quotient(ts: &mut TokenStream) -> Result<EtaQuotient, SyntaxError> {
    let mut factors = Vec::new();
    let mut q_power = Rational64::zero();
    let mut invert = false;
    loop {
        let at = ts.error("");
        let sgn = if invert { -1 } else { 1 };
        match ts.peek().clone() {
            Tok::Int(1) => {
                ts.next();
            }
            Tok::Ident(name) if name == "q" => {
                ts.next();
                let e = if ts.eat_punct('^') { ts.parse_exponent()? } else { Rational64::from_integer(1) };
                q_power += e * sgn;
            }
            Tok::Ident(name) if name == "f" || name == "fp" => {
                ts.next();
                ts.expect_punct('(')?;
                let k = ts.expect_int()?;
                ts.expect_punct(')')?;
                let e = if ts.eat_punct('^') { ts.parse_exponent()? } else { Rational64::from_integer(1) };
                if !e.is_integer() {
                    return Err(SyntaxError { message: "eta factor exponents must be integers".into(), ..at });
                }
                let k = u32::try_from(k)
                    .ok()
                    .filter(|k| *k > 0)
                    .ok_or_else(|| SyntaxError { message: "factor index must be a positive integer".into(), ..at.clone() })?;
                let exponent = i32::try_from(*e.numer() * sgn)
                    .map_err(|_| SyntaxError { message: "exponent out of range".into(), ..at.clone() })?;
                let sign = if name == "f" { Sign::Minus } else { Sign::Plus };
                factors.push(EtaFactor { k, sign, exponent });
            }
            other => return Err(ts.error(format!("expected `q`, `f(k)` or `fp(k)`, found {other}"))),
        }
        if ts.eat_punct('*') {
            invert = false;
        } else if ts.eat_punct('/') {
            invert = true;
        } else {
            break;
        }
    }
    let at = ts.error("");
    EtaQuotient::new(factors, q_power).map_err(|e| SyntaxError { message: e.to_string(), ..at })
}

// ---------------------------------------------------------------------------
// records and catalogue
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CatalogueError {
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    #[error("line {line}: duplicate identity id `{id}`")]
    DuplicateId { id: String, line: usize },
    #[error("identity `{id}`: relation has no equation (line {line}, column {column})")]
    NoEquation { id: String, line: usize, column: usize },
    #[error("identity `{id}`: relation is not polynomial after clearing denominators ({detail})")]
    NonPolynomial { id: String, detail: String },
    #[error("identity `{id}`: relation is trivially satisfied")]
    TrivialRelation { id: String },
}

/// A named P-Q pair and the relation `lhs = rhs` it satisfies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityRecord {
    pub id: String,
    pub p: EtaQuotient,
    pub q: EtaQuotient,
    pub lhs: Expr,
    pub rhs: Expr,
    pub source: String,
    poly: IntPoly,
}

impl IdentityRecord {
    pub fn new(id: &str, p: EtaQuotient, q: EtaQuotient, lhs: Expr, rhs: Expr, source: &str) -> Result<Self, CatalogueError> {
        let poly = clear_relation(id, &lhs, &rhs)?;
        Ok(IdentityRecord { id: id.to_string(), p, q, lhs, rhs, source: source.to_string(), poly })
    }

    /// The relation with denominators cleared: a primitive integer
    /// polynomial that vanishes at `(P(q), Q(q))`.
    pub fn polynomial(&self) -> &IntPoly {
        &self.poly
    }

    pub fn relation_text(&self) -> String {
        format!("{} = {}", render(&self.lhs), render(&self.rhs))
    }

    /// Negative control: the record with the first integer literal `from`
    /// (left side first) replaced by `to`.
    pub fn mutate_constant(&self, from: i64, to: i64) -> Option<Result<Self, CatalogueError>> {
        let (lhs, rhs) = match self.lhs.replace_first_int(from, to) {
            Some(l) => (l, self.rhs.clone()),
            None => (self.lhs.clone(), self.rhs.replace_first_int(from, to)?),
        };
        let id = format!("{}~{from}->{to}", self.id);
        Some(IdentityRecord::new(&id, self.p.clone(), self.q.clone(), lhs, rhs, &self.source))
    }
}

fn clear_relation(id: &str, lhs: &Expr, rhs: &Expr) -> Result<IntPoly, CatalogueError> {
    let conv = |e: &Expr| {
        poly::to_laurent(e).map_err(|err| CatalogueError::NonPolynomial { id: id.to_string(), detail: format!("{err:?}") })
    };
    let diff = conv(&Expr::Sub(Box::new(lhs.clone()), Box::new(rhs.clone())))?;
    if diff.is_zero() {
        return Err(CatalogueError::TrivialRelation { id: id.to_string() });
    }
    Ok(diff.clear())
}

impl fmt::Display for IdentityRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "identity {} {{", self.id)?;
        writeln!(f, "  P = {};", self.p)?;
        writeln!(f, "  Q = {};", self.q)?;
        writeln!(f, "  relation: {};", self.relation_text())?;
        writeln!(f, "  source: \"{}\"", self.source)?;
        writeln!(f, "}}")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Catalogue {
    records: Vec<IdentityRecord>,
}

const BUILTIN: &str = include_str!("../../data/catalogue.txt");

impl Catalogue {
    pub fn builtin() -> Self {
        Catalogue::parse(BUILTIN).expect("built-in catalogue parses")
    }

    pub fn builtin_text() -> &'static str {
        BUILTIN
    }

    pub fn parse(text: &str) -> Result<Self, CatalogueError> {
        let mut ts = TokenStream::new(text)?;
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        while !ts.at_eof() {
            let line = ts.error("").line;
            let rec = parse_record(&mut ts)?;
            if !seen.insert(rec.id.clone()) {
                return Err(CatalogueError::DuplicateId { id: rec.id, line });
            }
            records.push(rec);
        }
        Ok(Catalogue { records })
    }

    pub fn records(&self) -> &[IdentityRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&IdentityRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn render(&self) -> String {
        self.records.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("\n")
    }
}

fn parse_record(ts: &mut TokenStream) -> Result<IdentityRecord, CatalogueError> {
    ts.expect_keyword("identity")?;
    let id = ts.expect_ident()?;
    ts.expect_punct('{')?;

    ts.expect_keyword("P")?;
    ts.expect_punct('=')?;
    let p = parse_quotient(ts)?;
    ts.expect_punct(';')?;

    ts.expect_keyword("Q")?;
    ts.expect_punct('=')?;
    let q = parse_quotient(ts)?;
    ts.expect_punct(';')?;

    ts.expect_keyword("relation")?;
    ts.expect_punct(':')?;
    let lhs = parse_expr(ts, &RELATION)?;
    if !ts.eat_punct('=') {
        let at = ts.error("");
        return Err(CatalogueError::NoEquation { id, line: at.line, column: at.column });
    }
    let rhs = parse_expr(ts, &RELATION)?;
    ts.expect_punct(';')?;

    ts.expect_keyword("source")?;
    ts.expect_punct(':')?;
    let source = match ts.next() {
        Tok::Str(s) => s,
        other => return Err(ts.error(format!("expected a quoted source tag, found {other}")).into()),
    };
    ts.eat_punct(';');
    ts.expect_punct('}')?;
    IdentityRecord::new(&id, p, q, lhs, rhs, &source)
}

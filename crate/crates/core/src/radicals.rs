//! Closed-form radical expressions and the registry of printed values.
//!
//! A radical is built from integer literals with `+ - * /`, `sqrt(..)` and
//! rational powers `^(p/q)`. Fractional powers are principal real roots, so
//! every such base must be positive when evaluated.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::Signed;
use serde::Serialize;
use thiserror::Error;

use crate::bignum::{adaptive, digits_agreement, BignumError, PrecisionSpec, RealValue};
use crate::etaq::Verdict;
use crate::invariants::{big_g_numeric, g_numeric};
use crate::products::{a_numeric, b_numeric, ProductError};
use crate::syntax::{parse_expr, render, Expr, ExprConfig, SyntaxError, Tok, TokenStream};

const GRAMMAR: ExprConfig = ExprConfig { symbols: &[], allow_sqrt: true, allow_fractional_exponents: true };

#[derive(Clone, Debug, PartialEq, Error)]
pub enum RadicalError {
    #[error("division by a quantity that may vanish: {0}")]
    DivisionByZero(String),
    #[error("fractional power of a base that is not certainly positive: {0}")]
    NonPositiveBase(String),
    #[error(transparent)]
    Numeric(#[from] BignumError),
}

/// An expression tree over the integers, with no free symbols.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RadicalExpr(Expr);

impl RadicalExpr {
    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        let mut ts = TokenStream::new(text)?;
        let e = Self::parse_from(&mut ts)?;
        ts.expect_eof()?;
        Ok(e)
    }

    pub(crate) fn parse_from(ts: &mut TokenStream) -> Result<Self, SyntaxError> {
        parse_expr(ts, &GRAMMAR).map(RadicalExpr)
    }

    pub fn expr(&self) -> &Expr {
        &self.0
    }

    /// Nesting depth counting `n` and `sqrt(n)` as atoms of depth 0.
    pub fn depth(&self) -> usize {
        fn go(e: &Expr) -> usize {
            match e {
                Expr::Int(_) | Expr::Sym(_) => 0,
                Expr::Sqrt(a) if matches!(**a, Expr::Int(_)) => 0,
                Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sqrt(a) => 1 + go(a),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => 1 + go(a).max(go(b)),
            }
        }
        go(&self.0)
    }

    pub fn eval(&self, prec: &PrecisionSpec) -> Result<RealValue, RadicalError> {
        let mut failure = None;
        let out = adaptive(prec, |bits| match self.eval_bits(bits) {
            Ok(v) => Ok(v),
            Err(RadicalError::Numeric(e)) => Err(e),
            Err(e) => {
                failure = Some(e);
                Err(BignumError::Domain("radical evaluation"))
            }
        });
        match (out, failure) {
            (_, Some(e)) => Err(e),
            (Ok(v), None) => Ok(v),
            (Err(e), None) => Err(e.into()),
        }
    }

    /// One evaluation pass at a fixed working precision.
    pub fn eval_bits(&self, bits: usize) -> Result<RealValue, RadicalError> {
        eval_node(&self.0, bits)
    }

    /// Drops the right operand of the outermost product, if there is one.
    pub fn drop_last_factor(&self) -> Option<RadicalExpr> {
        match &self.0 {
            Expr::Mul(a, _) | Expr::Div(a, _) => Some(RadicalExpr((**a).clone())),
            _ => None,
        }
    }
}

fn eval_node(e: &Expr, bits: usize) -> Result<RealValue, RadicalError> {
    Ok(match e {
        Expr::Int(v) => RealValue::from_i64(*v, bits),
        Expr::Sym(c) => unreachable!("symbol {c} in a radical"),
        Expr::Neg(a) => eval_node(a, bits)?.neg(),
        Expr::Add(a, b) => eval_node(a, bits)?.add(&eval_node(b, bits)?),
        Expr::Sub(a, b) => eval_node(a, bits)?.sub(&eval_node(b, bits)?),
        Expr::Mul(a, b) => eval_node(a, bits)?.mul(&eval_node(b, bits)?),
        Expr::Div(a, b) => {
            let d = eval_node(b, bits)?;
            if !d.abs().certainly_positive() {
                return Err(RadicalError::DivisionByZero(render(b)));
            }
            eval_node(a, bits)?.div(&d)
        }
        Expr::Pow(a, r) => {
            let base = eval_node(a, bits)?;
            if r.is_integer() {
                if r.is_negative() && !base.abs().certainly_positive() {
                    return Err(RadicalError::DivisionByZero(render(a)));
                }
                base.powi(*r.numer())
            } else {
                if !base.certainly_positive() {
                    return Err(RadicalError::NonPositiveBase(render(a)));
                }
                base.pow_ratio(r)?
            }
        }
        Expr::Sqrt(a) => {
            let base = eval_node(a, bits)?;
            if base.is_zero() && base.error_log10().is_none() {
                return Ok(base);
            }
            if !base.certainly_positive() {
                return Err(RadicalError::NonPositiveBase(render(a)));
            }
            base.sqrt()?
        }
    })
}

impl fmt::Display for RadicalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(&self.0))
    }
}

impl FromStr for RadicalExpr {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RadicalExpr::parse(s)
    }
}

impl Serialize for RadicalExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn parse_radical(text: &str) -> Result<RadicalExpr, SyntaxError> {
    RadicalExpr::parse(text)
}

pub fn eval_radical(expr: &RadicalExpr, prec: &PrecisionSpec) -> Result<RealValue, RadicalError> {
    expr.eval(prec)
}

// ---------------------------------------------------------------------------
// registry
// ---------------------------------------------------------------------------

/// A quantity with a definitional evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    A { m: Rational64, n: Rational64 },
    B { m: Rational64, n: Rational64 },
    SmallG(Rational64),
    BigG(Rational64),
}

fn fmt_index(r: &Rational64) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl Quantity {
    /// Identifier form, e.g. `a_10_3` or `g_10/3`.
    pub fn id(&self) -> String {
        match self {
            Quantity::A { m, n } => format!("a_{}_{}", fmt_index(m), fmt_index(n)),
            Quantity::B { m, n } => format!("b_{}_{}", fmt_index(m), fmt_index(n)),
            Quantity::SmallG(n) => format!("g_{}", fmt_index(n)),
            Quantity::BigG(n) => format!("G_{}", fmt_index(n)),
        }
    }

    pub fn eval(&self, prec: &PrecisionSpec) -> Result<RealValue, CorollaryError> {
        Ok(match self {
            Quantity::A { m, n } => a_numeric(*m, *n, prec)?.value,
            Quantity::B { m, n } => b_numeric(*m, *n, prec)?.value,
            Quantity::SmallG(n) => g_numeric(*n, prec)?,
            Quantity::BigG(n) => big_g_numeric(*n, prec)?,
        })
    }

    fn parse(ts: &mut TokenStream) -> Result<Self, SyntaxError> {
        let kind = ts.expect_ident()?;
        match kind.as_str() {
            "a" | "b" => {
                let m = parse_index(ts)?;
                let n = parse_index(ts)?;
                Ok(if kind == "a" { Quantity::A { m, n } } else { Quantity::B { m, n } })
            }
            "g" => Ok(Quantity::SmallG(parse_index(ts)?)),
            "G" => Ok(Quantity::BigG(parse_index(ts)?)),
            other => Err(ts.error(format!("unknown quantity `{other}`"))),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::A { m, n } => write!(f, "a {} {}", fmt_index(m), fmt_index(n)),
            Quantity::B { m, n } => write!(f, "b {} {}", fmt_index(m), fmt_index(n)),
            Quantity::SmallG(n) => write!(f, "g {}", fmt_index(n)),
            Quantity::BigG(n) => write!(f, "G {}", fmt_index(n)),
        }
    }
}

/// A positive rational index `p` or `p/q`. A `/` followed by a letter is left
/// for the caller, since it divides two quantities.
fn parse_index(ts: &mut TokenStream) -> Result<Rational64, SyntaxError> {
    let p = ts.expect_int()?;
    let q = if matches!(ts.peek(), Tok::Punct('/')) && matches!(ts.peek_at(1), Tok::Int(_)) {
        ts.next();
        ts.expect_int()?
    } else {
        1
    };
    if p <= 0 || q <= 0 {
        return Err(ts.error("indices must be positive"));
    }
    Ok(Rational64::new(p, q))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum CombineOp {
    Mul,
    Div,
}

impl CombineOp {
    fn symbol(self) -> char {
        match self {
            CombineOp::Mul => '*',
            CombineOp::Div => '/',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Single(Quantity),
    /// `left op right`, optionally under a square root.
    Combination { left: Quantity, op: CombineOp, right: Quantity, sqrt: bool },
    /// A pure radical identity `lhs = expr`.
    Radical(RadicalExpr),
}

impl Target {
    pub fn eval(&self, prec: &PrecisionSpec) -> Result<RealValue, CorollaryError> {
        match self {
            Target::Single(q) => q.eval(prec),
            Target::Combination { left, op, right, sqrt } => {
                let l = left.eval(prec)?;
                let r = right.eval(prec)?;
                let v = match op {
                    CombineOp::Mul => l.mul(&r),
                    CombineOp::Div => l.div(&r),
                };
                Ok(if *sqrt { v.sqrt()? } else { v })
            }
            Target::Radical(e) => Ok(e.eval(prec)?),
        }
    }

    fn id(&self, radical_ordinal: usize) -> String {
        match self {
            Target::Single(q) => q.id(),
            Target::Combination { left, op, right, sqrt } => {
                let inner = format!("{}{}{}", left.id(), op.symbol(), right.id());
                if *sqrt {
                    format!("sqrt({inner})")
                } else {
                    inner
                }
            }
            Target::Radical(_) => format!("radical_{radical_ordinal}"),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Single(q) => write!(f, "{q}"),
            Target::Combination { left, op, right, sqrt: false } => write!(f, "{left} {} {right}", op.symbol()),
            Target::Combination { left, op, right, sqrt: true } => write!(f, "sqrt({left} {} {right})", op.symbol()),
            Target::Radical(e) => write!(f, "radical {e}"),
        }
    }
}

/// One printed closed form: `target = expr`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorollaryRecord {
    pub id: String,
    pub target: Target,
    pub expr: RadicalExpr,
    pub source: String,
}

impl fmt::Display for CorollaryRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.target, self.expr)?;
        if !self.source.is_empty() {
            write!(f, "  # {}", self.source)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum RegistryError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("duplicate registry id `{id}` on line {line}")]
    DuplicateId { id: String, line: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Registry {
    records: Vec<CorollaryRecord>,
}

impl Registry {
    pub fn builtin_text() -> &'static str {
        include_str!("../data/registry.txt")
    }

    pub fn builtin() -> Self {
        Registry::parse(Self::builtin_text()).expect("builtin registry parses")
    }

    pub fn parse(text: &str) -> Result<Self, RegistryError> {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        let mut radicals = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let (body, source) = match raw.split_once('#') {
                Some((b, s)) => (b, s.trim()),
                None => (raw, ""),
            };
            if body.trim().is_empty() {
                continue;
            }
            let (target, expr) = parse_line(body).map_err(|mut e| {
                e.line = line;
                e
            })?;
            if matches!(target, Target::Radical(_)) {
                radicals += 1;
            }
            let id = target.id(radicals);
            if !seen.insert(id.clone()) {
                return Err(RegistryError::DuplicateId { id, line });
            }
            records.push(CorollaryRecord { id, target, expr, source: source.to_string() });
        }
        Ok(Registry { records })
    }

    pub fn records(&self) -> &[CorollaryRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&CorollaryRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// The record whose target is exactly `q`.
    pub fn single(&self, q: &Quantity) -> Option<&CorollaryRecord> {
        self.records.iter().find(|r| r.target == Target::Single(*q))
    }

    pub fn combination(&self, left: &Quantity, op: CombineOp, right: &Quantity) -> Option<&CorollaryRecord> {
        self.records.iter().find(|r| {
            matches!(&r.target, Target::Combination { left: l, op: o, right: rr, sqrt: false }
                if l == left && *o == op && rr == right)
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn render(&self) -> String {
        self.records.iter().map(|r| format!("{r}\n")).collect()
    }
}

fn parse_line(body: &str) -> Result<(Target, RadicalExpr), SyntaxError> {
    let mut ts = TokenStream::new(body)?;
    let target = match ts.peek().clone() {
        Tok::Ident(w) if w == "radical" => {
            ts.next();
            Target::Radical(RadicalExpr::parse_from(&mut ts)?)
        }
        Tok::Ident(w) if w == "sqrt" => {
            ts.next();
            ts.expect_punct('(')?;
            let t = parse_quantity_target(&mut ts, true)?;
            ts.expect_punct(')')?;
            t
        }
        _ => parse_quantity_target(&mut ts, false)?,
    };
    ts.expect_punct('=')?;
    let expr = RadicalExpr::parse_from(&mut ts)?;
    ts.expect_eof()?;
    Ok((target, expr))
}

fn parse_quantity_target(ts: &mut TokenStream, sqrt: bool) -> Result<Target, SyntaxError> {
    let left = Quantity::parse(ts)?;
    let op = if ts.eat_punct('*') {
        CombineOp::Mul
    } else if ts.eat_punct('/') {
        CombineOp::Div
    } else if sqrt {
        return Err(ts.error("sqrt(..) must wrap a product or ratio"));
    } else {
        return Ok(Target::Single(left));
    };
    let right = Quantity::parse(ts)?;
    Ok(Target::Combination { left, op, right, sqrt })
}

// ---------------------------------------------------------------------------
// verification
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CorollaryError {
    #[error(transparent)]
    Radical(#[from] RadicalError),
    #[error(transparent)]
    Numeric(#[from] BignumError),
    #[error(transparent)]
    Product(#[from] ProductError),
}

#[derive(Clone, Debug, Serialize)]
pub struct CorollaryCheck {
    pub id: String,
    pub closed_form: RealValue,
    pub definitional: RealValue,
    pub digits: f64,
    pub verdict: Verdict,
}

/// Compares the closed form against the definitional value; passes iff they
/// agree to at least the target number of digits.
pub fn verify_corollary(rec: &CorollaryRecord, prec: &PrecisionSpec) -> Result<CorollaryCheck, CorollaryError> {
    let closed_form = rec.expr.eval(prec)?;
    let definitional = rec.target.eval(prec)?;
    let digits = digits_agreement(&closed_form, &definitional, f64::from(prec.working_digits()));
    let verdict = Verdict::from_bool(digits >= f64::from(prec.target_digits));
    Ok(CorollaryCheck { id: rec.id.clone(), closed_form, definitional, digits, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str, digits: u32) -> RealValue {
        parse_radical(text).unwrap().eval(&PrecisionSpec::new(digits)).unwrap()
    }

    #[test]
    fn parses_and_measures_depth() {
        let e = parse_radical("(sqrt(2)-1)*(sqrt(3)+sqrt(2))^(1/2)").unwrap();
        assert_eq!(e.depth(), 3);
        assert_eq!(e.to_string(), "(sqrt(2)-1)*(sqrt(3)+sqrt(2))^(1/2)");
        assert_eq!(parse_radical("1").unwrap().expr(), &Expr::Int(1));
        assert_eq!(parse_radical("1").unwrap().depth(), 0);
    }

    #[test]
    fn negative_base_under_root_is_rejected() {
        assert!(parse_radical("(-2)^(1/2)").is_err());
        assert!(parse_radical("sqrt(-2)").is_err());
        let e = parse_radical("(1-3)^(1/2)").unwrap();
        assert!(matches!(e.eval(&PrecisionSpec::new(20)), Err(RadicalError::NonPositiveBase(_))));
    }

    #[test]
    fn division_by_zero() {
        let e = parse_radical("1/(sqrt(4)-2)").unwrap();
        assert!(matches!(e.eval(&PrecisionSpec::new(20)), Err(RadicalError::DivisionByZero(_))));
    }

    #[test]
    fn nested_radical_simplification() {
        let l = ev("sqrt(39+12*sqrt(10))", 80);
        let r = ev("sqrt(15)+2*sqrt(6)", 80);
        assert!(digits_agreement(&l, &r, 95.0) >= 80.0);
    }

    #[test]
    fn golden_ratio_conjugates() {
        let v = ev("((sqrt(5)-1)/2)*((sqrt(5)+1)/2)", 60);
        assert!(digits_agreement(&v, &RealValue::from_i64(1, 256), 75.0) >= 60.0);
    }

    #[test]
    fn a43_is_in_unit_interval() {
        let v = ev("(sqrt(2)+1)*((sqrt(3)-1)/sqrt(2))^(5/2)", 40);
        assert!(v.certainly_positive());
        assert!(v.to_f64() < 1.0);
        assert!((v.to_f64() - 0.465_415_937_4).abs() < 1e-9, "{}", v.to_f64());
    }

    #[test]
    fn registry_parses_and_round_trips() {
        let reg = Registry::builtin();
        assert_eq!(Registry::parse(&reg.render()).unwrap(), reg);
        for id in ["a_2_3", "g_10/3", "a_10_3*b_40_3", "a_10_3/b_40_3", "sqrt(a_6_13/b_24_13)", "g_6*g_2/3", "radical_1"] {
            assert!(reg.get(id).is_some(), "{id}");
        }
        let g = reg.get("g_10/3").unwrap();
        assert_eq!(g.target, Target::Single(Quantity::SmallG(Rational64::new(10, 3))));
        assert!(reg.get("a_2_3").unwrap().source.starts_with("corollary "));
        let a_values = reg.records().iter().filter(|r| matches!(r.target, Target::Single(Quantity::A { .. }))).count();
        assert_eq!(a_values, 21);
    }

    #[test]
    fn registry_errors() {
        let e = Registry::parse("g 30 = 1\n\ng 30 = 2").unwrap_err();
        assert_eq!(e, RegistryError::DuplicateId { id: "g_30".into(), line: 3 });
        let RegistryError::Syntax(s) = Registry::parse("# c\na 2 = 1").unwrap_err() else { panic!() };
        assert_eq!(s.line, 2);
        assert!(Registry::parse("sqrt(a 2 3) = 1").is_err());
        assert!(Registry::parse("q 2 3 = 1").is_err());
        assert!(Registry::parse("a 0 3 = 1").is_err());
    }

    #[test]
    fn index_slash_versus_ratio() {
        let reg = Registry::parse("g 6 / g 2/3 = 1\ng 4/3 = 1").unwrap();
        let Target::Combination { left, op, right, .. } = &reg.records()[0].target else { panic!() };
        assert_eq!(*left, Quantity::SmallG(Rational64::from_integer(6)));
        assert_eq!(*op, CombineOp::Div);
        assert_eq!(*right, Quantity::SmallG(Rational64::new(2, 3)));
        assert_eq!(reg.records()[1].id, "g_4/3");
    }

    #[test]
    fn corollary_a25_passes_and_mutant_fails() {
        let reg = Registry::builtin();
        let prec = PrecisionSpec::new(60);
        let rec = reg.get("a_2_5").unwrap();
        let chk = verify_corollary(rec, &prec).unwrap();
        assert!(chk.verdict.passed(), "{}", chk.digits);

        let a23 = reg.get("a_2_3").unwrap();
        let mut mutant = a23.clone();
        mutant.expr = a23.expr.drop_last_factor().unwrap();
        let chk = verify_corollary(&mutant, &prec).unwrap();
        assert!(!chk.verdict.passed());
        assert!(chk.digits < 2.0, "{}", chk.digits);
    }

    #[test]
    fn radical_record_compares_both_sides() {
        let reg = Registry::builtin();
        let chk = verify_corollary(reg.get("radical_1").unwrap(), &PrecisionSpec::new(60)).unwrap();
        assert!(chk.verdict.passed());
    }
}

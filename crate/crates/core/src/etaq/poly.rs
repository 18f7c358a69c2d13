//! Laurent polynomials in `P`, `Q` and denominator clearing.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::syntax::Expr;

/// `Σ c_ij P^i Q^j` with rational coefficients and integer (possibly
/// negative) exponents.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub(crate) struct Laurent {
    terms: BTreeMap<(i64, i64), BigRational>,
}

impl Laurent {
    fn constant(c: BigRational) -> Self {
        Laurent::monomial(0, 0, c)
    }

    fn monomial(i: i64, j: i64, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((i, j), c);
        }
        Laurent { terms }
    }

    fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (k, c) in &other.terms {
            *terms.entry(*k).or_insert_with(BigRational::zero) += c;
        }
        terms.retain(|_, c| !c.is_zero());
        Laurent { terms }
    }

    fn neg(&self) -> Self {
        Laurent { terms: self.terms.iter().map(|(k, c)| (*k, -c)).collect() }
    }

    fn mul(&self, other: &Self) -> Self {
        let mut terms: BTreeMap<(i64, i64), BigRational> = BTreeMap::new();
        for ((i1, j1), c1) in &self.terms {
            for ((i2, j2), c2) in &other.terms {
                *terms.entry((i1 + i2, j1 + j2)).or_insert_with(BigRational::zero) += c1 * c2;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Laurent { terms }
    }

    fn pow(&self, e: u64) -> Self {
        let mut result = Laurent::constant(BigRational::one());
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Inverse of a single-term Laurent polynomial.
    fn invert_monomial(&self) -> Option<Self> {
        if self.terms.len() != 1 {
            return None;
        }
        let ((i, j), c) = self.terms.iter().next()?;
        Some(Laurent::monomial(-i, -j, c.recip()))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Multiplies by the minimal monomial and the lcm of denominators, divides
    /// by the content and fixes the sign so the highest monomial is positive.
    pub fn clear(&self) -> IntPoly {
        let amin = self.terms.keys().map(|k| k.0).min().unwrap_or(0);
        let bmin = self.terms.keys().map(|k| k.1).min().unwrap_or(0);
        let den = self.terms.values().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let mut terms: BTreeMap<(u32, u32), BigInt> = self
            .terms
            .iter()
            .map(|((i, j), c)| {
                let v = c.numer() * (&den / c.denom());
                (((i - amin) as u32, (j - bmin) as u32), v)
            })
            .collect();
        let content = terms.values().fold(BigInt::zero(), |g, c| g.gcd(c));
        if !content.is_zero() {
            for c in terms.values_mut() {
                *c /= &content;
            }
        }
        if terms.values().next_back().is_some_and(|c| c.is_negative()) {
            for c in terms.values_mut() {
                *c = -c.clone();
            }
        }
        IntPoly { terms }
    }
}

/// Why an expression does not define a Laurent polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum LaurentError {
    NonMonomialDivisor(String),
    DivisionByZero,
    Unsupported(&'static str),
}

pub(crate) fn to_laurent(e: &Expr) -> Result<Laurent, LaurentError> {
    Ok(match e {
        Expr::Int(v) => Laurent::constant(BigRational::from_integer(BigInt::from(*v))),
        Expr::Sym('P') => Laurent::monomial(1, 0, BigRational::one()),
        Expr::Sym('Q') => Laurent::monomial(0, 1, BigRational::one()),
        Expr::Sym(_) => return Err(LaurentError::Unsupported("symbols other than P and Q")),
        Expr::Neg(a) => to_laurent(a)?.neg(),
        Expr::Add(a, b) => to_laurent(a)?.add(&to_laurent(b)?),
        Expr::Sub(a, b) => to_laurent(a)?.add(&to_laurent(b)?.neg()),
        Expr::Mul(a, b) => to_laurent(a)?.mul(&to_laurent(b)?),
        Expr::Div(a, b) => {
            let d = to_laurent(b)?;
            if d.is_zero() {
                return Err(LaurentError::DivisionByZero);
            }
            let inv = d.invert_monomial().ok_or_else(|| LaurentError::NonMonomialDivisor(b.to_string()))?;
            to_laurent(a)?.mul(&inv)
        }
        Expr::Pow(base, r) => {
            if !r.is_integer() {
                return Err(LaurentError::Unsupported("fractional exponents"));
            }
            let k = *r.numer();
            let b = to_laurent(base)?;
            if k >= 0 {
                b.pow(k as u64)
            } else {
                if b.is_zero() {
                    return Err(LaurentError::DivisionByZero);
                }
                let inv = b.invert_monomial().ok_or_else(|| LaurentError::NonMonomialDivisor(base.to_string()))?;
                inv.pow(k.unsigned_abs())
            }
        }
        Expr::Sqrt(_) => return Err(LaurentError::Unsupported("square roots")),
    })
}

/// A primitive integer polynomial `Σ c_ij P^i Q^j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntPoly {
    terms: BTreeMap<(u32, u32), BigInt>,
}

impl IntPoly {
    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, &BigInt)> {
        self.terms.iter().map(|((i, j), c)| (*i, *j, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree_p(&self) -> u32 {
        self.terms.keys().map(|k| k.0).max().unwrap_or(0)
    }

    pub fn degree_q(&self) -> u32 {
        self.terms.keys().map(|k| k.1).max().unwrap_or(0)
    }

    pub fn max_abs_coefficient(&self) -> BigInt {
        self.terms.values().map(|c| c.abs()).max().unwrap_or_default()
    }
}

impl std::fmt::Display for IntPoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for ((i, j), c) in self.terms.iter().rev() {
            let sep = match (first, c.is_negative()) {
                (true, true) => "-",
                (true, false) => "",
                (false, true) => " - ",
                (false, false) => " + ",
            };
            first = false;
            let mag = c.abs();
            let mut parts = Vec::new();
            if !mag.is_one() || (*i == 0 && *j == 0) {
                parts.push(mag.to_string());
            }
            for (sym, e) in [("P", *i), ("Q", *j)] {
                match e {
                    0 => {}
                    1 => parts.push(sym.to_string()),
                    _ => parts.push(format!("{sym}^{e}")),
                }
            }
            write!(f, "{sep}{}", parts.join("*"))?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

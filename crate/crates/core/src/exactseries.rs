//! Exact truncated Laurent series on the `q^(1/24)` lattice.
//!
//! A [`PowerSeries`] stores its nonzero coefficients by lattice exponent `e`
//! (meaning `q^(e/24)`) and a truncation order `N`: coefficients above `N` are
//! unknown. Every operation reports only what is provable from its inputs.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::bignum::{one, zero, RealValue};
use crate::blocks::{BlockKind, Sign};

/// Lattice denominator: exponent `e` stands for `q^(e/24)`.
pub const LATTICE: i64 = 24;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("truncation order must be non-negative, got {0}")]
    NegativeOrder(i64),
    #[error("block index k must be positive")]
    ZeroIndex,
    #[error("argument scale must be positive, got {0}")]
    NonPositiveScale(i64),
    #[error("cannot invert a series with no known nonzero coefficient")]
    NotInvertible,
}

#[derive(Clone, PartialEq, Eq)]
pub struct PowerSeries {
    coeffs: BTreeMap<i64, BigRational>,
    order: i64,
}

impl fmt::Debug for PowerSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PowerSeries({self})")
    }
}

impl fmt::Display for PowerSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in &self.coeffs {
            let sep = if first {
                if c.is_negative() { "-" } else { "" }
            } else if c.is_negative() {
                " - "
            } else {
                " + "
            };
            first = false;
            write!(f, "{sep}{}*q^({e}/{LATTICE})", c.abs())?;
        }
        if first {
            f.write_str("0")?;
        }
        write!(f, " + O(q^({}/{LATTICE}))", self.order + 1)
    }
}

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

impl PowerSeries {
    pub fn zero(order: i64) -> Self {
        PowerSeries { coeffs: BTreeMap::new(), order }
    }

    pub fn one(order: i64) -> Self {
        PowerSeries::from_terms([(0, rat(1))], order)
    }

    /// Builds a series from `(exponent, coefficient)` pairs, summing repeats
    /// and dropping zeros and exponents beyond `order`.
    pub fn from_terms<I>(terms: I, order: i64) -> Self
    where
        I: IntoIterator<Item = (i64, BigRational)>,
    {
        let mut coeffs: BTreeMap<i64, BigRational> = BTreeMap::new();
        for (e, c) in terms {
            if e > order {
                continue;
            }
            *coeffs.entry(e).or_insert_with(BigRational::zero) += c;
        }
        coeffs.retain(|_, c| !c.is_zero());
        PowerSeries { coeffs, order }
    }

    pub fn from_int_terms<I>(terms: I, order: i64) -> Self
    where
        I: IntoIterator<Item = (i64, i64)>,
    {
        PowerSeries::from_terms(terms.into_iter().map(|(e, c)| (e, rat(c))), order)
    }

    pub fn order(&self) -> i64 {
        self.order
    }

    pub fn lattice_denominator(&self) -> i64 {
        LATTICE
    }

    /// Coefficient of `q^(e/24)`, `None` when `e` is beyond the truncation order.
    pub fn coeff(&self, e: i64) -> Option<BigRational> {
        (e <= self.order).then(|| self.coeffs.get(&e).cloned().unwrap_or_else(BigRational::zero))
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &BigRational)> {
        self.coeffs.iter().map(|(e, c)| (*e, c))
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Lowest exponent with a nonzero coefficient.
    pub fn valuation(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    /// Leading exponent for order propagation: `N + 1` for a known-zero series.
    fn lead(&self) -> i64 {
        self.valuation().unwrap_or(self.order + 1)
    }

    pub fn truncate(&self, order: i64) -> Self {
        let order = order.min(self.order);
        PowerSeries { coeffs: self.coeffs.range(..=order).map(|(e, c)| (*e, c.clone())).collect(), order }
    }

    pub fn neg(&self) -> Self {
        PowerSeries { coeffs: self.coeffs.iter().map(|(e, c)| (*e, -c)).collect(), order: self.order }
    }

    pub fn add(&self, other: &Self) -> Self {
        let order = self.order.min(other.order);
        let terms = self.coeffs.iter().chain(other.coeffs.iter()).map(|(e, c)| (*e, c.clone()));
        PowerSeries::from_terms(terms, order)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return PowerSeries::zero(self.order);
        }
        PowerSeries { coeffs: self.coeffs.iter().map(|(e, v)| (*e, v * c)).collect(), order: self.order }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let order = (self.order + other.lead()).min(other.order + self.lead());
        let mut coeffs: BTreeMap<i64, BigRational> = BTreeMap::new();
        for (ea, ca) in &self.coeffs {
            for (eb, cb) in other.coeffs.range(..=order - ea) {
                *coeffs.entry(ea + eb).or_insert_with(BigRational::zero) += ca * cb;
            }
        }
        coeffs.retain(|_, c| !c.is_zero());
        PowerSeries { coeffs, order }
    }

    /// Multiplicative inverse; a series `c q^l (1 + ...)` known to order `N`
    /// inverts to order `N - 2l`.
    pub fn invert(&self) -> Result<Self, SeriesError> {
        let (l, lead) = match self.coeffs.iter().next() {
            Some((e, c)) => (*e, c.clone()),
            None => return Err(SeriesError::NotInvertible),
        };
        let rel = self.order - l;
        let step = self.coeffs.keys().skip(1).fold(0i64, |g, e| g.gcd(&(e - l)));
        let inv_lead = lead.recip();
        let mut out: BTreeMap<i64, BigRational> = BTreeMap::new();
        out.insert(0, inv_lead.clone());
        if step > 0 {
            let mut k = step;
            while k <= rel {
                let mut acc = BigRational::zero();
                for (e, c) in self.coeffs.range(l + 1..=l + k) {
                    if let Some(s) = out.get(&(k - (e - l))) {
                        acc += c * s;
                    }
                }
                if !acc.is_zero() {
                    out.insert(k, -acc * &inv_lead);
                }
                k += step;
            }
        }
        Ok(PowerSeries { coeffs: out.into_iter().map(|(e, c)| (e - l, c)).collect(), order: rel - l })
    }

    pub fn pow_int(&self, e: i64) -> Result<Self, SeriesError> {
        if e < 0 {
            return self.invert()?.pow_int(-e);
        }
        let mut result = PowerSeries::one(self.order - self.lead());
        let mut base = self.clone();
        let mut e = e as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Ok(result)
    }

    /// Multiplies by `q^(d/24)`.
    pub fn shift(&self, d: i64) -> Self {
        PowerSeries { coeffs: self.coeffs.iter().map(|(e, c)| (e + d, c.clone())).collect(), order: self.order + d }
    }

    /// Substitutes `q -> q^k`.
    pub fn scale_argument(&self, k: i64) -> Result<Self, SeriesError> {
        if k <= 0 {
            return Err(SeriesError::NonPositiveScale(k));
        }
        Ok(PowerSeries {
            coeffs: self.coeffs.iter().map(|(e, c)| (e * k, c.clone())).collect(),
            order: k * (self.order + 1) - 1,
        })
    }

    /// Evaluates the known part at `t = q^(1/24)` by Horner's rule over the
    /// sparse exponents, with the unknown tail bounded by `tail_bound`.
    pub fn eval_lattice(&self, t: &RealValue, tail_bound: Option<&RealValue>) -> RealValue {
        let bits = t.bits();
        let mut acc = zero(bits);
        let mut prev: Option<i64> = None;
        for (e, c) in self.coeffs.iter().rev() {
            if let Some(p) = prev {
                acc = acc.mul(&t.powi(p - e));
            }
            acc = acc.add(&rational_value(c, bits));
            prev = Some(*e);
        }
        if let Some(p) = prev {
            acc = acc.mul(&t.powi(p));
        }
        match tail_bound {
            Some(b) => acc.widen_by(b),
            None => acc,
        }
    }
}

fn rational_value(c: &BigRational, bits: usize) -> RealValue {
    let num = RealValue::from_bigint(c.numer(), bits);
    if c.denom().is_one() {
        num
    } else {
        num.div(&RealValue::from_bigint(c.denom(), bits))
    }
}

fn check_order(order: i64) -> Result<(), SeriesError> {
    if order < 0 {
        Err(SeriesError::NegativeOrder(order))
    } else {
        Ok(())
    }
}

/// Sparse block `Σ c_j x^{e_j}` at `x = q^k`, as a lattice series.
fn shape_series(kind: BlockKind, k: i64, order: i64) -> PowerSeries {
    let (shape, sign) = kind.shape().expect("plain sparse block");
    let step = LATTICE * k;
    let terms = shape
        .terms(sign)
        .map(|(e, c)| (e as i64 * step, c))
        .take_while(|(e, _)| *e <= order);
    PowerSeries::from_int_terms(terms, order)
}

/// `f(-q^k)` for `Sign::Minus`, `f(q^k)` for `Sign::Plus`.
pub fn series_f(k: u32, sign: Sign, order: i64) -> Result<PowerSeries, SeriesError> {
    if k == 0 {
        return Err(SeriesError::ZeroIndex);
    }
    check_order(order)?;
    let kind = match sign {
        Sign::Minus => BlockKind::FMinus,
        Sign::Plus => BlockKind::FPlus,
    };
    Ok(shape_series(kind, i64::from(k), order))
}

pub fn series_phi(sign: Sign, order: i64) -> Result<PowerSeries, SeriesError> {
    check_order(order)?;
    let kind = match sign {
        Sign::Plus => BlockKind::PhiPlus,
        Sign::Minus => BlockKind::PhiMinus,
    };
    Ok(shape_series(kind, 1, order))
}

pub fn series_psi(sign: Sign, order: i64) -> Result<PowerSeries, SeriesError> {
    check_order(order)?;
    let kind = match sign {
        Sign::Plus => BlockKind::PsiPlus,
        Sign::Minus => BlockKind::PsiMinus,
    };
    Ok(shape_series(kind, 1, order))
}

/// Any block at `q^k`; `χ` is assembled as a quotient.
pub fn block_series(kind: BlockKind, k: u32, order: i64) -> Result<PowerSeries, SeriesError> {
    if k == 0 {
        return Err(SeriesError::ZeroIndex);
    }
    check_order(order)?;
    match kind {
        BlockKind::ChiPlus | BlockKind::ChiMinus => {
            let sign = if kind == BlockKind::ChiPlus { Sign::Plus } else { Sign::Minus };
            let num = series_f(k, sign, order)?;
            let den = series_f(2 * k, Sign::Minus, order)?;
            Ok(num.mul(&den.invert()?))
        }
        _ => Ok(shape_series(kind, i64::from(k), order)),
    }
}

/// Outcome of a coefficient-wise comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SeriesComparison {
    /// All coefficients agree through this lattice exponent.
    Agree { through: i64 },
    Differ { exponent: i64, lhs: BigRational, rhs: BigRational },
}

impl SeriesComparison {
    pub fn passed(&self) -> bool {
        matches!(self, SeriesComparison::Agree { .. })
    }
}

/// Compares two series up to the smaller of their truncation orders.
pub fn compare(lhs: &PowerSeries, rhs: &PowerSeries) -> SeriesComparison {
    let through = lhs.order.min(rhs.order);
    let diff = lhs.sub(rhs);
    match diff.coeffs.iter().next() {
        Some((e, _)) if *e <= through => SeriesComparison::Differ {
            exponent: *e,
            lhs: lhs.coeff(*e).unwrap_or_default(),
            rhs: rhs.coeff(*e).unwrap_or_default(),
        },
        _ => SeriesComparison::Agree { through },
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry24Report {
    pub product_form: SeriesComparison,
    pub quotient_form: SeriesComparison,
}

impl Entry24Report {
    pub fn passed(&self) -> bool {
        self.product_form.passed() && self.quotient_form.passed()
    }

    /// The first failing exponent across both checks.
    pub fn first_failure(&self) -> Option<i64> {
        [&self.product_form, &self.quotient_form]
            .iter()
            .filter_map(|c| match c {
                SeriesComparison::Differ { exponent, .. } => Some(*exponent),
                SeriesComparison::Agree { .. } => None,
            })
            .min()
    }
}

/// Checks `f(q) f(-q^2) = ψ(-q) φ(q)` and
/// `f(q) / f(-q^2) = f(-q^2)^2 / (f(-q) f(-q^4))` coefficient-wise.
pub fn check_entry24(order: i64) -> Result<Entry24Report, SeriesError> {
    check_order(order)?;
    let fp1 = series_f(1, Sign::Plus, order)?;
    let f1 = series_f(1, Sign::Minus, order)?;
    let f2 = series_f(2, Sign::Minus, order)?;
    let f4 = series_f(4, Sign::Minus, order)?;
    let lhs = fp1.mul(&f2);
    let rhs = series_psi(Sign::Minus, order)?.mul(&series_phi(Sign::Plus, order)?);
    let product_form = compare(&lhs, &rhs);

    let lhs = fp1.mul(&f2.invert()?);
    let rhs = f2.mul(&f2).mul(&f1.mul(&f4).invert()?);
    let quotient_form = compare(&lhs, &rhs);
    Ok(Entry24Report { product_form, quotient_form })
}

/// `Π_{n≥1} (1 - q^n)` expanded factor by factor, for cross-checking the
/// pentagonal sum.
pub fn euler_product(order: i64) -> Result<PowerSeries, SeriesError> {
    check_order(order)?;
    let mut acc = PowerSeries::one(order);
    let mut n = 1;
    while n * LATTICE <= order {
        acc = acc.mul(&PowerSeries::from_int_terms([(0, 1), (n * LATTICE, -1)], order));
        n += 1;
    }
    Ok(acc)
}

/// Evaluates a block's lattice expansion at numeric `q`, adding the tail
/// bound of the omitted terms.
pub fn eval_block_series(kind: BlockKind, q: &RealValue, order: i64) -> Result<RealValue, SeriesError> {
    let s = block_series(kind, 1, order)?;
    let bits = q.bits();
    let t = q.pow_ratio(&num_rational::Rational64::new(1, LATTICE)).expect("q is positive");
    // every sparse block has |c| <= 2, so the tail past q^(N/24) is below 2 x^M / (1 - x)
    let m = s.order / LATTICE + 1;
    let tail = q.powi(m).mul_i64(2).div(&one(bits).sub(q));
    Ok(s.eval_lattice(&t, Some(&tail)))
}

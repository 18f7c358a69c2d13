//! Arbitrary-precision evaluation of theta blocks, nomes and eta quotients.
//!
//! Values are [`RealValue`]s carrying a rigorous absolute error bound. Public
//! entry points take a [`PrecisionSpec`] and retry with a larger guard until
//! the bound is below `10^-target * max(1, |value|)`.

mod real;

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocks::{BlockKind, Sign};
use crate::etaq::EtaQuotient;

pub use real::{digits_agreement, digits_to_bits, one, zero, RealValue};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum BignumError {
    #[error("cannot parse `{0}` as a decimal number")]
    Parse(String),
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("{0} must be positive")]
    NonPositive(String),
    #[error("series argument must lie strictly between 0 and 1, got {0}")]
    QOutOfRange(String),
    #[error("precision {0}")]
    InvalidPrecision(String),
    #[error("could not reach {target} digits (error bound 10^{achieved:.1})")]
    PrecisionExhausted { target: u32, achieved: f64 },
}

pub const MIN_GUARD_DIGITS: u32 = 15;
pub(crate) const MAX_RETRIES: u32 = 4;

/// Target decimal digits plus guard digits carried internally.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionSpec {
    pub target_digits: u32,
    pub guard_digits: u32,
}

impl PrecisionSpec {
    /// Default guard: `max(15, ceil(0.2 * target) + 15)`.
    pub fn new(target_digits: u32) -> Self {
        let guard = (target_digits.div_ceil(5) + MIN_GUARD_DIGITS).max(MIN_GUARD_DIGITS);
        PrecisionSpec { target_digits, guard_digits: guard }
    }

    pub fn with_guard(target_digits: u32, guard_digits: u32) -> Result<Self, BignumError> {
        if target_digits == 0 {
            return Err(BignumError::InvalidPrecision("target must be at least one digit".into()));
        }
        if guard_digits < MIN_GUARD_DIGITS {
            return Err(BignumError::InvalidPrecision(format!(
                "guard of {guard_digits} digits is below the minimum of {MIN_GUARD_DIGITS}"
            )));
        }
        Ok(PrecisionSpec { target_digits, guard_digits })
    }

    pub fn working_digits(&self) -> u32 {
        self.target_digits + self.guard_digits
    }

    pub fn working_bits(&self) -> usize {
        digits_to_bits(self.working_digits())
    }

    /// The low-precision spec used to bootstrap root selection.
    pub fn bootstrap() -> Self {
        PrecisionSpec::new(20)
    }

    pub(crate) fn widened(&self, attempt: u32) -> Self {
        PrecisionSpec { target_digits: self.target_digits, guard_digits: self.guard_digits << attempt }
    }
}

/// Runs `f` at the working precision of `prec`, doubling the guard until the
/// result meets the target.
pub(crate) fn adaptive<F>(prec: &PrecisionSpec, mut f: F) -> Result<RealValue, BignumError>
where
    F: FnMut(usize) -> Result<RealValue, BignumError>,
{
    let mut last = None;
    for attempt in 0..MAX_RETRIES {
        let v = f(prec.widened(attempt).working_bits())?;
        if v.error_within_digits(prec.target_digits) {
            return Ok(v);
        }
        last = Some(v);
    }
    let achieved = last.and_then(|v| v.error_log10()).unwrap_or(f64::INFINITY);
    Err(BignumError::PrecisionExhausted { target: prec.target_digits, achieved })
}

/// Serializes a rational as `"p"` or `"p/q"`.
pub(crate) fn serialize_ratio<S: serde::Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
    if r.is_integer() {
        s.collect_str(r.numer())
    } else {
        s.collect_str(r)
    }
}

fn check_unit_interval(x: &RealValue) -> Result<(), BignumError> {
    let one = one(x.bits());
    let lower_ok = x.certainly_positive();
    let upper_ok = one.sub(x).certainly_positive();
    if lower_ok && upper_ok {
        Ok(())
    } else {
        Err(BignumError::QOutOfRange(x.to_sci_string(12)))
    }
}

/// The nome `exp(-pi sqrt(m/n))` together with its logarithm.
#[derive(Clone, Debug)]
pub struct Nome {
    pub m: Rational64,
    pub n: Rational64,
    pub q: RealValue,
    pub log_q: RealValue,
}

impl Nome {
    pub(crate) fn at_bits(m: Rational64, n: Rational64, bits: usize) -> Result<Self, BignumError> {
        if !m.is_positive() {
            return Err(BignumError::NonPositive(format!("m = {m}")));
        }
        if !n.is_positive() {
            return Err(BignumError::NonPositive(format!("n = {n}")));
        }
        let ratio = RealValue::from_ratio(&(m / n), bits);
        let log_q = RealValue::pi(bits).mul(&ratio.sqrt()?).neg();
        let q = log_q.exp();
        Ok(Nome { m, n, q, log_q })
    }

    /// `q^r` computed from the logarithm, exact for any rational `r`.
    pub fn power(&self, r: &Rational64) -> RealValue {
        if r.is_integer() {
            return self.q.powi(*r.numer());
        }
        self.log_q.mul(&RealValue::from_ratio(r, self.q.bits())).exp()
    }
}

pub fn nome(m: Rational64, n: Rational64, prec: &PrecisionSpec) -> Result<Nome, BignumError> {
    let mut found = None;
    adaptive(prec, |bits| {
        let nm = Nome::at_bits(m, n, bits)?;
        let q = nm.q.clone();
        found = Some(nm);
        Ok(q)
    })?;
    Ok(found.expect("adaptive returned a value"))
}

/// Evaluates a sparse block at `x` in (0,1) to roughly `bits` bits, folding the
/// truncated tail into the error bound.
pub(crate) fn eval_block_at(kind: BlockKind, x: &RealValue) -> Result<RealValue, BignumError> {
    check_unit_interval(x)?;
    let Some((shape, sign)) = kind.shape() else {
        let num_kind = if kind == BlockKind::ChiPlus { BlockKind::FPlus } else { BlockKind::FMinus };
        let num = eval_block_at(num_kind, x)?;
        let den = eval_block_at(BlockKind::FMinus, &x.square())?;
        return Ok(num.div(&den));
    };
    let bits = x.bits();
    let log2_x = x.log10_abs().expect("x is positive") * std::f64::consts::LOG2_10;
    let log2_one_minus = (1.0 - x.to_f64()).log2();
    let log2_cmax = f64::from(shape.max_coefficient()).log2();
    let stop = -(bits as f64) - 4.0;

    let mut sum = zero(bits);
    let mut power = one(bits);
    let mut prev = 0u64;
    for (e, c) in shape.terms(sign) {
        if e > 0 {
            let tail = log2_cmax + e as f64 * log2_x - log2_one_minus;
            if tail < stop {
                return Ok(sum.widen_pow2(tail.ceil() as i64 + 2));
            }
        }
        if e > prev {
            power = power.mul(&x.powi((e - prev) as i64));
            prev = e;
        }
        sum = sum.add(&power.mul_i64(c));
    }
    unreachable!("block term iterators are infinite")
}

/// A theta block at `q^k`.
pub fn eval_block(kind: BlockKind, k: u32, q: &RealValue, prec: &PrecisionSpec) -> Result<RealValue, BignumError> {
    if k == 0 {
        return Err(BignumError::NonPositive("block index k".into()));
    }
    check_unit_interval(q)?;
    adaptive(prec, |bits| eval_block_at(kind, &q.with_bits(bits).powi(i64::from(k))))
}

pub(crate) fn eval_eta_quotient_at(quot: &EtaQuotient, q: &RealValue) -> Result<RealValue, BignumError> {
    check_unit_interval(q)?;
    let mut acc = if quot.q_power().is_zero() { one(q.bits()) } else { q.pow_ratio(&quot.q_power())? };
    for f in quot.factors() {
        let kind = match f.sign {
            Sign::Minus => BlockKind::FMinus,
            Sign::Plus => BlockKind::FPlus,
        };
        let v = eval_block_at(kind, &q.powi(i64::from(f.k)))?;
        acc = acc.mul(&v.powi(i64::from(f.exponent)));
    }
    Ok(acc)
}

pub fn eval_eta_quotient(quot: &EtaQuotient, q: &RealValue, prec: &PrecisionSpec) -> Result<RealValue, BignumError> {
    adaptive(prec, |bits| eval_eta_quotient_at(quot, &q.with_bits(bits)))
}

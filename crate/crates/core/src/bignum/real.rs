//! Arbitrary-precision reals carrying an absolute error bound.
//!
//! Every primitive operation is evaluated at the working precision of its
//! operands and widens the bound by the propagated input error plus a
//! rounding allowance. Bounds are kept at 64-bit precision and rounded
//! towards +inf, so they are never understated by their own arithmetic.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use num_bigint::BigInt;
use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive};

use super::BignumError;

const RM: RoundingMode = RoundingMode::ToEven;
const BOUND_BITS: usize = 64;
/// Allowance, in units of 2^(exponent - precision), for arithmetic results.
const ARITH_ULPS: u8 = 2;
/// Allowance for exp / ln / sqrt / pi.
const FUNC_ULPS: u8 = 8;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constants cache"));
}

pub(crate) fn with_consts<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

/// Decimal digits to binary working precision, rounded up to whole words.
pub fn digits_to_bits(digits: u32) -> usize {
    let bits = (f64::from(digits) * std::f64::consts::LOG2_10).ceil() as usize + 8;
    bits.div_ceil(64) * 64
}

#[derive(Clone)]
pub struct RealValue {
    value: BigFloat,
    error: BigFloat,
    bits: usize,
}

// ---------------------------------------------------------------------------
// error-bound helpers (all results are upper bounds unless named *_down)
// ---------------------------------------------------------------------------

fn bound_zero() -> BigFloat {
    BigFloat::from_u8(0, BOUND_BITS)
}

fn bound_inf() -> BigFloat {
    BigFloat::from_f64(f64::INFINITY, BOUND_BITS)
}

fn abs_up(x: &BigFloat) -> BigFloat {
    let mut a = x.abs();
    a.set_precision(BOUND_BITS, RoundingMode::Up).expect("precision");
    a
}

fn abs_down(x: &BigFloat) -> BigFloat {
    let mut a = x.abs();
    a.set_precision(BOUND_BITS, RoundingMode::Down).expect("precision");
    a
}

fn up_add(a: &BigFloat, b: &BigFloat) -> BigFloat {
    a.add(b, BOUND_BITS, RoundingMode::Up)
}

fn up_mul(a: &BigFloat, b: &BigFloat) -> BigFloat {
    a.mul(b, BOUND_BITS, RoundingMode::Up)
}

fn up_div(a: &BigFloat, b: &BigFloat) -> BigFloat {
    if b.is_zero() || b.is_negative() {
        return bound_inf();
    }
    a.div(b, BOUND_BITS, RoundingMode::Up)
}

fn down_sub(a: &BigFloat, b: &BigFloat) -> BigFloat {
    a.sub(b, BOUND_BITS, RoundingMode::Down)
}

fn small(v: u32) -> BigFloat {
    BigFloat::from_u32(v, BOUND_BITS)
}

fn pow2(e: i64) -> BigFloat {
    let mut one = BigFloat::from_u8(1, BOUND_BITS);
    // 1 = 0.5 * 2^1 in astro-float's normalisation
    let e = (e + 1).clamp(i32::MIN as i64 + 2, i32::MAX as i64 - 2);
    one.set_exponent(e as i32);
    one
}

fn is_finite(x: &BigFloat) -> bool {
    !x.is_inf() && !x.is_nan()
}

/// Rounding allowance for a freshly computed result.
fn rounding(result: &BigFloat, bits: usize, ulps: u8) -> BigFloat {
    if result.is_zero() {
        return bound_zero();
    }
    match result.exponent() {
        Some(e) => up_mul(&pow2(e as i64 - bits as i64), &small(u32::from(ulps))),
        None => bound_inf(),
    }
}

impl RealValue {
    fn from_parts(value: BigFloat, error: BigFloat, bits: usize) -> Self {
        let error = if is_finite(&value) { error } else { bound_inf() };
        RealValue { value, error, bits }
    }

    pub fn from_i64(v: i64, bits: usize) -> Self {
        let value = BigFloat::from_i64(v, bits.max(64));
        RealValue::from_parts(value, bound_zero(), bits)
    }

    pub fn from_bigint(v: &BigInt, bits: usize) -> Self {
        match v.to_i64() {
            Some(small) => RealValue::from_i64(small, bits),
            None => {
                let digits = v.to_string();
                let len = digits.trim_start_matches('-').len();
                let value = with_consts(|cc| BigFloat::parse(&digits, Radix::Dec, bits.max(4 * len), RM, cc));
                RealValue::from_parts(value, bound_zero(), bits)
            }
        }
    }

    pub fn from_ratio(r: &Rational64, bits: usize) -> Self {
        let n = RealValue::from_i64(*r.numer(), bits);
        if *r.denom() == 1 {
            return n;
        }
        n.div(&RealValue::from_i64(*r.denom(), bits))
    }

    /// Parses a plain decimal literal such as `0.05` or `1.5e-3`.
    pub fn parse_decimal(text: &str, bits: usize) -> Result<Self, BignumError> {
        let t = text.trim();
        let ok = !t.is_empty()
            && t.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'))
            && t.chars().any(|c| c.is_ascii_digit());
        if !ok {
            return Err(BignumError::Parse(text.to_string()));
        }
        let value = with_consts(|cc| BigFloat::parse(t, Radix::Dec, bits, RM, cc));
        if value.is_nan() || value.is_inf() {
            return Err(BignumError::Parse(text.to_string()));
        }
        let error = rounding(&value, bits, 1);
        Ok(RealValue::from_parts(value, error, bits))
    }

    pub fn pi(bits: usize) -> Self {
        let value = with_consts(|cc| cc.pi(bits, RM));
        let error = rounding(&value, bits, FUNC_ULPS);
        RealValue::from_parts(value, error, bits)
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// The midpoint value.
    pub fn value(&self) -> &BigFloat {
        &self.value
    }

    /// Upper bound on the absolute error of [`Self::value`].
    pub fn error_bound(&self) -> &BigFloat {
        &self.error
    }

    pub fn with_bits(&self, bits: usize) -> Self {
        let mut v = self.value.clone();
        let rounded = v.precision().map(|p| p > bits).unwrap_or(false);
        let mut error = self.error.clone();
        if rounded {
            v.set_precision(bits, RM).expect("precision");
            error = up_add(&error, &rounding(&v, bits, 1));
        }
        RealValue::from_parts(v, error, bits)
    }

    fn op_bits(&self, other: &Self) -> usize {
        self.bits.max(other.bits)
    }

    /// Widens the error bound by `2^log2_extra`.
    pub(crate) fn widen_pow2(&self, log2_extra: i64) -> Self {
        let mut out = self.clone();
        out.error = up_add(&out.error, &pow2(log2_extra));
        out
    }

    /// Widens the error bound by another value's magnitude plus its error.
    pub(crate) fn widen_by(&self, extra: &RealValue) -> Self {
        let mut out = self.clone();
        out.error = up_add(&out.error, &up_add(&abs_up(&extra.value), &extra.error));
        out
    }

    /// The centre of the interval as an exact value.
    pub(crate) fn midpoint(&self) -> Self {
        RealValue::from_parts(self.value.clone(), bound_zero(), self.bits)
    }

    /// The error bound as an exact value.
    pub(crate) fn error_value(&self) -> Self {
        RealValue::from_parts(self.error.clone(), bound_zero(), self.bits)
    }

    pub fn neg(&self) -> Self {
        RealValue::from_parts(self.value.neg(), self.error.clone(), self.bits)
    }

    pub fn abs(&self) -> Self {
        RealValue::from_parts(self.value.abs(), self.error.clone(), self.bits)
    }

    pub fn add(&self, other: &Self) -> Self {
        let bits = self.op_bits(other);
        let value = self.value.add(&other.value, bits, RM);
        let error = up_add(&up_add(&self.error, &other.error), &rounding(&value, bits, ARITH_ULPS));
        RealValue::from_parts(value, error, bits)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let bits = self.op_bits(other);
        let value = self.value.sub(&other.value, bits, RM);
        let error = up_add(&up_add(&self.error, &other.error), &rounding(&value, bits, ARITH_ULPS));
        RealValue::from_parts(value, error, bits)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let bits = self.op_bits(other);
        let value = self.value.mul(&other.value, bits, RM);
        let propagated = up_add(
            &up_add(&up_mul(&abs_up(&self.value), &other.error), &up_mul(&abs_up(&other.value), &self.error)),
            &up_mul(&self.error, &other.error),
        );
        let error = up_add(&propagated, &rounding(&value, bits, ARITH_ULPS));
        RealValue::from_parts(value, error, bits)
    }

    pub fn mul_i64(&self, k: i64) -> Self {
        self.mul(&RealValue::from_i64(k, self.bits))
    }

    pub fn div(&self, other: &Self) -> Self {
        let bits = self.op_bits(other);
        let value = self.value.div(&other.value, bits, RM);
        // |a'/b' - a/b| <= (ea + |a/b| eb) / (|b| - eb)
        let denom = down_sub(&abs_down(&other.value), &other.error);
        let numer = up_add(&self.error, &up_mul(&abs_up(&value), &other.error));
        let error = up_add(&up_div(&numer, &denom), &rounding(&value, bits, ARITH_ULPS));
        RealValue::from_parts(value, error, bits)
    }

    pub fn recip(&self) -> Self {
        RealValue::from_i64(1, self.bits).div(self)
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    /// Integer power by repeated squaring; negative exponents invert.
    pub fn powi(&self, e: i64) -> Self {
        if e < 0 {
            return self.powi(-e).recip();
        }
        let mut result = RealValue::from_i64(1, self.bits);
        let mut base = self.clone();
        let mut e = e as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.square();
            }
        }
        result
    }

    pub fn sqrt(&self) -> Result<Self, BignumError> {
        if !self.value.is_positive() && !self.value.is_zero() {
            return Err(BignumError::Domain("square root of a negative number"));
        }
        let bits = self.bits;
        let value = self.value.sqrt(bits, RM);
        // |sqrt(a+d) - sqrt(a)| <= |d| / sqrt(a)
        let propagated = if self.error.is_zero() {
            bound_zero()
        } else {
            let root_down = abs_down(&value);
            up_div(&self.error, &root_down)
        };
        let error = up_add(&propagated, &rounding(&value, bits, FUNC_ULPS));
        Ok(RealValue::from_parts(value, error, bits))
    }

    pub fn exp(&self) -> Self {
        let bits = self.bits;
        let value = with_consts(|cc| self.value.exp(bits, RM, cc));
        // |e^(v+d) - e^v| <= e^v (e^|d| - 1) <= 2 e^v |d| for |d| <= 1
        let propagated = if self.error.is_zero() {
            bound_zero()
        } else if self.error.cmp(&small(1)).map(|c| c <= 0).unwrap_or(false) {
            up_mul(&up_mul(&abs_up(&value), &self.error), &small(2))
        } else {
            bound_inf()
        };
        let error = up_add(&propagated, &rounding(&value, bits, FUNC_ULPS));
        RealValue::from_parts(value, error, bits)
    }

    pub fn ln(&self) -> Result<Self, BignumError> {
        if !self.is_positive() {
            return Err(BignumError::Domain("logarithm of a non-positive number"));
        }
        let bits = self.bits;
        let value = with_consts(|cc| self.value.ln(bits, RM, cc));
        // |ln(a+d) - ln a| <= |d| / (a - |d|)
        let lower = down_sub(&abs_down(&self.value), &self.error);
        let propagated = if self.error.is_zero() { bound_zero() } else { up_div(&self.error, &lower) };
        let abs_err = if value.is_zero() {
            // ln(1): rounding relative to the argument scale
            rounding(&self.value, bits, FUNC_ULPS)
        } else {
            rounding(&value, bits, FUNC_ULPS)
        };
        Ok(RealValue::from_parts(value, up_add(&propagated, &abs_err), bits))
    }

    /// `self^r` for rational `r`: integer powers directly, otherwise the
    /// principal real power `exp(r ln self)` of a positive base.
    pub fn pow_ratio(&self, r: &Rational64) -> Result<Self, BignumError> {
        if r.is_integer() {
            if r.is_negative() && self.value.is_zero() {
                return Err(BignumError::Domain("zero to a negative power"));
            }
            return Ok(self.powi(*r.numer()));
        }
        if !self.is_positive() {
            return Err(BignumError::Domain("fractional power of a non-positive number"));
        }
        let scaled = self.ln()?.mul(&RealValue::from_ratio(r, self.bits));
        Ok(scaled.exp())
    }

    // -----------------------------------------------------------------------
    // inspection
    // -----------------------------------------------------------------------

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.value.is_positive() && !self.value.is_zero()
    }

    /// True when the whole error interval lies above zero.
    pub fn certainly_positive(&self) -> bool {
        self.is_positive() && self.value.abs().cmp(&self.error).map(|c| c > 0).unwrap_or(false)
    }

    pub fn cmp_value(&self, other: &Self) -> Ordering {
        match self.value.cmp(&other.value) {
            Some(c) if c < 0 => Ordering::Less,
            Some(c) if c > 0 => Ordering::Greater,
            _ => Ordering::Equal,
        }
    }

    pub fn abs_cmp_value(&self, other: &Self) -> Ordering {
        match self.value.abs_cmp(&other.value) {
            Some(c) if c < 0 => Ordering::Less,
            Some(c) if c > 0 => Ordering::Greater,
            _ => Ordering::Equal,
        }
    }

    pub fn error_is_finite(&self) -> bool {
        is_finite(&self.error)
    }

    /// True when `error <= 10^(-digits) * max(1, |value|)`.
    pub fn error_within_digits(&self, digits: u32) -> bool {
        if !self.error_is_finite() {
            return false;
        }
        let scale = log10_abs(&self.value).unwrap_or(f64::NEG_INFINITY).max(0.0);
        match log10_abs(&self.error) {
            None => true,
            Some(le) => le <= scale - f64::from(digits),
        }
    }

    /// log10 of the error bound, `None` for an exact value.
    pub fn error_log10(&self) -> Option<f64> {
        log10_abs(&self.error)
    }

    /// log10 |value|, `None` for zero.
    pub fn log10_abs(&self) -> Option<f64> {
        log10_abs(&self.value)
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.value)
    }

    /// Scientific notation with `digits` significant digits (truncated).
    pub fn to_sci_string(&self, digits: usize) -> String {
        let (neg, mantissa, exp10) = match decimal_parts(&self.value) {
            None => return "0".to_string(),
            Some(p) => p,
        };
        let digits = digits.max(1);
        let mantissa = format!("{mantissa:0<digits$}");
        let head = &mantissa[..1];
        let tail = &mantissa[1..digits];
        let sign = if neg { "-" } else { "" };
        if tail.is_empty() {
            format!("{sign}{head}e{exp10}")
        } else {
            format!("{sign}{head}.{tail}e{exp10}")
        }
    }

    /// Plain positional notation with `digits` significant digits (truncated).
    pub fn to_decimal_string(&self, digits: usize) -> String {
        let (neg, mantissa, exp10) = match decimal_parts(&self.value) {
            None => return "0".to_string(),
            Some(p) => p,
        };
        let digits = digits.max(1);
        let mantissa = format!("{mantissa:0<digits$}");
        let sig: String = mantissa[..digits].to_string();
        let sign = if neg { "-" } else { "" };
        if !(-40..=40).contains(&exp10) {
            return self.to_sci_string(digits);
        }
        let s = if exp10 >= 0 {
            let int_len = exp10 as usize + 1;
            if sig.len() <= int_len {
                format!("{sig}{}", "0".repeat(int_len - sig.len()))
            } else {
                format!("{}.{}", &sig[..int_len], &sig[int_len..])
            }
        } else {
            format!("0.{}{}", "0".repeat((-exp10 - 1) as usize), sig)
        };
        format!("{sign}{s}")
    }
}

/// Number of agreeing significant decimal digits: `-log10(|a - b| / |b|)`,
/// capped at `cap`.
pub fn digits_agreement(a: &RealValue, b: &RealValue, cap: f64) -> f64 {
    let bits = a.bits.max(b.bits);
    let diff = a.value.sub(&b.value, bits, RM);
    let Some(ld) = log10_abs(&diff) else {
        return cap;
    };
    let Some(lb) = log10_abs(&b.value) else {
        return 0.0_f64.max(-ld).min(cap);
    };
    (lb - ld).clamp(0.0, cap)
}

fn decimal_parts(x: &BigFloat) -> Option<(bool, String, i64)> {
    if x.is_zero() || x.is_nan() || x.is_inf() {
        return None;
    }
    let s = with_consts(|cc| x.format(Radix::Dec, RoundingMode::ToZero, cc)).ok()?;
    let (neg, s) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.as_str()),
    };
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    let all: String = format!("{int_part}{frac_part}");
    let lead = all.find(|c: char| c != '0')?;
    let exp10 = exp + int_part.len() as i64 - 1 - lead as i64;
    let mantissa = all[lead..].trim_end_matches('0').to_string();
    let mantissa = if mantissa.is_empty() { "0".to_string() } else { mantissa };
    Some((neg, mantissa, exp10))
}

fn log10_abs(x: &BigFloat) -> Option<f64> {
    if x.is_zero() {
        return None;
    }
    if x.is_inf() || x.is_nan() {
        return Some(f64::INFINITY);
    }
    let e = x.exponent()? as f64;
    // mantissa in [0.5, 1): refine with the leading bits
    let mut m = x.abs();
    m.set_exponent(0);
    let mf = to_f64_small(&m);
    Some((e + mf.log2()) * std::f64::consts::LOG10_2)
}

fn to_f64_small(m: &BigFloat) -> f64 {
    // m in [0.5, 1)
    let mut t = m.clone();
    t.set_precision(64, RoundingMode::ToZero).expect("precision");
    let s = with_consts(|cc| t.format(Radix::Dec, RoundingMode::ToZero, cc)).unwrap_or_default();
    s.parse::<f64>().unwrap_or(0.75)
}

fn to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf() {
        return if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    let mut t = x.clone();
    t.set_precision(64, RoundingMode::ToEven).expect("precision");
    let s = with_consts(|cc| t.format(Radix::Dec, RoundingMode::ToEven, cc)).unwrap_or_default();
    s.parse::<f64>().unwrap_or(f64::NAN)
}

impl fmt::Debug for RealValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "RealValue({} ± 1e{:.1})",
            self.to_sci_string(24),
            self.error_log10().unwrap_or(f64::NEG_INFINITY)
        )
    }
}

impl fmt::Display for RealValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(20);
        f.write_str(&self.to_decimal_string(digits))
    }
}

impl serde::Serialize for RealValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let digits = (self.bits as f64 * std::f64::consts::LOG10_2) as usize;
        s.serialize_str(&self.to_sci_string(digits))
    }
}

/// Convenience: the exact integer zero.
pub fn zero(bits: usize) -> RealValue {
    RealValue::from_i64(0, bits)
}

/// Convenience: the exact integer one.
pub fn one(bits: usize) -> RealValue {
    RealValue::from_i64(1, bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BITS: usize = 384;

    #[test]
    fn arithmetic_matches_known_constants() {
        let two = RealValue::from_i64(2, BITS);
        let root2 = two.sqrt().unwrap();
        assert!(root2.to_decimal_string(30).starts_with("1.41421356237309504880168872420"));
        let pi = RealValue::pi(BITS);
        assert!(pi.to_decimal_string(30).starts_with("3.14159265358979323846264338327"));
        let e_pi = pi.neg().exp();
        assert!(e_pi.to_decimal_string(25).starts_with("0.04321391826377224977441"));
    }

    #[test]
    fn error_bounds_cover_recomputation() {
        let low = RealValue::pi(256).sqrt().unwrap().exp().ln().unwrap();
        let high = RealValue::pi(1024).sqrt().unwrap().exp().ln().unwrap();
        let diff = low.sub(&high.with_bits(1024));
        // |low - high| must be within low's claimed bound plus high's
        let lhs = diff.value().abs();
        let rhs = low.error_bound().add(high.error_bound(), 64, RoundingMode::Up);
        assert!(lhs.cmp(&rhs).unwrap() <= 0);
        assert!(low.error_within_digits(60));
    }

    #[test]
    fn decimal_rendering() {
        let x = RealValue::parse_decimal("0.05", BITS).unwrap();
        assert_eq!(x.to_decimal_string(5), "0.050000");
        let y = RealValue::from_i64(-1234, BITS);
        assert_eq!(y.to_decimal_string(6), "-1234.00");
        assert_eq!(y.to_sci_string(3), "-1.23e3");
        assert_eq!(RealValue::from_i64(0, BITS).to_decimal_string(4), "0");
        assert!((x.to_f64() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_garbage_and_domain_errors() {
        assert!(RealValue::parse_decimal("abc", BITS).is_err());
        assert!(RealValue::parse_decimal("", BITS).is_err());
        assert!(RealValue::from_i64(-2, BITS).sqrt().is_err());
        assert!(RealValue::from_i64(0, BITS).ln().is_err());
        assert!(RealValue::from_i64(-2, BITS).pow_ratio(&Rational64::new(1, 2)).is_err());
    }

    #[test]
    fn rational_powers() {
        let x = RealValue::from_i64(8, BITS);
        let cube_root = x.pow_ratio(&Rational64::new(1, 3)).unwrap();
        assert!(digits_agreement(&cube_root, &RealValue::from_i64(2, BITS), 200.0) > 100.0);
        let inv = x.pow_ratio(&Rational64::new(-2, 1)).unwrap();
        assert!(digits_agreement(&inv, &RealValue::from_ratio(&Rational64::new(1, 64), BITS), 200.0) > 100.0);
    }

    #[test]
    fn agreement_digits() {
        let a = RealValue::from_ratio(&Rational64::new(1, 3), BITS);
        let b = a.add(&RealValue::parse_decimal("1e-40", BITS).unwrap());
        let d = digits_agreement(&a, &b, 200.0);
        assert!((d - 39.52).abs() < 0.1, "{d}");
        assert_eq!(digits_agreement(&a, &a, 77.0), 77.0);
    }
}

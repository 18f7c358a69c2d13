//! Numeric and exact-series verification of catalogue records.

use num_rational::Rational64;
use serde::Serialize;
use thiserror::Error;

use super::{EtaQuotient, IdentityRecord, IntPoly};
use crate::bignum::{
    eval_block_at, eval_eta_quotient_at, one, zero, BignumError, Nome, PrecisionSpec, RealValue, MAX_RETRIES,
};
use crate::blocks::BlockKind;
use crate::exactseries::{series_f, PowerSeries, SeriesError, LATTICE};

/// Fixed probe points `q = 1/100, 1/20, 1/10, 1/5`.
pub const PROBES: [(i64, i64); 4] = [(1, 100), (1, 20), (1, 10), (1, 5)];

/// Smallest target accepted by the numeric verifier.
pub const MIN_NUMERIC_DIGITS: u32 = 40;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum VerifyError {
    #[error("numeric verification needs at least {MIN_NUMERIC_DIGITS} target digits, got {0}")]
    TargetTooLow(u32),
    #[error("series verification needs order of at least {LATTICE}, got {0}")]
    OrderTooLow(i64),
    #[error("every monomial vanished; the relation cannot be normalised")]
    VanishingMonomials,
    #[error(transparent)]
    Numeric(#[from] BignumError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// A normalised residual and its verdict: pass iff `|value| <= 10^tolerance_log10`.
#[derive(Clone, Debug, Serialize)]
pub struct Residual {
    pub value: RealValue,
    pub tolerance_log10: f64,
    pub verdict: Verdict,
}

impl Residual {
    pub fn judge(value: RealValue, tolerance_log10: f64) -> Self {
        let ok = match value.log10_abs() {
            None => true,
            Some(l) => l <= tolerance_log10,
        };
        Residual { value, tolerance_log10, verdict: Verdict::from_bool(ok) }
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    /// log10 |value|, `-inf` for an exact zero.
    pub fn magnitude_log10(&self) -> f64 {
        self.value.log10_abs().unwrap_or(f64::NEG_INFINITY)
    }

    /// The computed error bound is small enough for the verdict to be meaningful.
    fn resolved(&self) -> bool {
        self.value.error_log10().is_none_or(|e| e <= self.tolerance_log10 - 2.0)
    }
}

fn tolerance_log10(prec: &PrecisionSpec) -> f64 {
    -(f64::from(prec.target_digits) - 15.0)
}

/// Where an identity is probed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbePoint {
    Fixed { num: i64, den: i64 },
    /// `exp(-pi sqrt(1/n))`
    NaturalNome { n: u32 },
}

impl ProbePoint {
    pub fn label(&self) -> String {
        match self {
            ProbePoint::Fixed { num, den } => format!("q={}", decimal(*num, *den)),
            ProbePoint::NaturalNome { n } => format!("q=nome(1,{n})"),
        }
    }

    pub fn value(&self, bits: usize) -> Result<RealValue, BignumError> {
        match self {
            ProbePoint::Fixed { num, den } => Ok(RealValue::from_ratio(&Rational64::new(*num, *den), bits)),
            ProbePoint::NaturalNome { n } => {
                Ok(Nome::at_bits(Rational64::from_integer(1), Rational64::from_integer(i64::from(*n)), bits)?.q)
            }
        }
    }
}

fn decimal(num: i64, den: i64) -> String {
    format!("{}", num as f64 / den as f64)
}

/// Largest odd part among the factor indices of `P` and `Q`.
pub fn natural_nome_index(rec: &IdentityRecord) -> u32 {
    let odd = |k: u32| k >> k.trailing_zeros();
    rec.p.factors().iter().chain(rec.q.factors()).map(|f| odd(f.k)).max().unwrap_or(1)
}

/// The fixed probes followed by the record's natural nome.
pub fn probe_points(rec: &IdentityRecord) -> Vec<ProbePoint> {
    let mut v: Vec<ProbePoint> = PROBES.iter().map(|&(num, den)| ProbePoint::Fixed { num, den }).collect();
    v.push(ProbePoint::NaturalNome { n: natural_nome_index(rec) });
    v
}

fn powers(x: &RealValue, n: u32) -> Vec<RealValue> {
    let mut out = vec![one(x.bits())];
    for i in 1..=n as usize {
        let next = out[i - 1].mul(x);
        out.push(next);
    }
    out
}

/// `Σ c_ij P^i Q^j / max |c_ij P^i Q^j|`.
pub(crate) fn relation_residual(poly: &IntPoly, p: &RealValue, q: &RealValue) -> Result<RealValue, VerifyError> {
    let bits = p.bits();
    let pp = powers(p, poly.degree_p());
    let qp = powers(q, poly.degree_q());
    let mut sum = zero(bits);
    let mut max: Option<RealValue> = None;
    for (i, j, c) in poly.terms() {
        let m = pp[i as usize].mul(&qp[j as usize]).mul(&RealValue::from_bigint(c, bits));
        if max.as_ref().is_none_or(|cur| m.abs_cmp_value(cur).is_gt()) {
            max = Some(m.clone());
        }
        sum = sum.add(&m);
    }
    let max = max.filter(|m| !m.is_zero()).ok_or(VerifyError::VanishingMonomials)?;
    Ok(sum.div(&max.abs()))
}

/// Evaluates `P`, `Q` at `q` and the cleared relation at them.
pub fn verify_numeric(rec: &IdentityRecord, q: &RealValue, prec: &PrecisionSpec) -> Result<Residual, VerifyError> {
    if prec.target_digits < MIN_NUMERIC_DIGITS {
        return Err(VerifyError::TargetTooLow(prec.target_digits));
    }
    let tol = tolerance_log10(prec);
    let mut last = None;
    for attempt in 0..MAX_RETRIES {
        let qb = q.with_bits(prec.widened(attempt).working_bits());
        let p_val = eval_eta_quotient_at(&rec.p, &qb)?;
        let q_val = eval_eta_quotient_at(&rec.q, &qb)?;
        let r = Residual::judge(relation_residual(rec.polynomial(), &p_val, &q_val)?, tol);
        if r.resolved() {
            return Ok(r);
        }
        last = Some(r);
    }
    Ok(last.expect("at least one attempt"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SeriesFailure {
    /// Lattice exponent (`q^(e/24)`) of the first nonzero coefficient.
    pub exponent: i64,
    pub coefficient: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SeriesReport {
    /// Relative order checked beyond the lowest monomial.
    pub order: i64,
    /// Lattice exponent of the lowest monomial after clearing.
    pub lowest_exponent: i64,
    pub verdict: Verdict,
    pub first_failure: Option<SeriesFailure>,
}

impl SeriesReport {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    pub fn checked_through(&self) -> i64 {
        self.lowest_exponent + self.order
    }
}

/// `Π f(∓q^k)^e` without the q-power, to relative order `order`.
fn body_series(quot: &EtaQuotient, order: i64) -> Result<PowerSeries, SeriesError> {
    let mut acc = PowerSeries::one(order);
    for f in quot.factors() {
        acc = acc.mul(&series_f(f.k, f.sign, order)?.pow_int(i64::from(f.exponent))?);
    }
    Ok(acc)
}

/// Expands the cleared relation as an exact series and checks that every
/// coefficient within `order` lattice steps of its lowest term vanishes.
pub fn verify_series(rec: &IdentityRecord, order: i64) -> Result<SeriesReport, VerifyError> {
    if order < LATTICE {
        return Err(VerifyError::OrderTooLow(order));
    }
    let poly = rec.polynomial();
    let (vp, vq) = (rec.p.lattice_shift(), rec.q.lattice_shift());
    let shift = |i: u32, j: u32| i64::from(i) * vp + i64::from(j) * vq;
    let lowest = poly.terms().map(|(i, j, _)| shift(i, j)).min().unwrap_or(0);

    let bp = body_series(&rec.p, order)?;
    let bq = body_series(&rec.q, order)?;
    let mut pp = vec![PowerSeries::one(order)];
    for i in 1..=poly.degree_p() as usize {
        let next = pp[i - 1].mul(&bp);
        pp.push(next);
    }
    let mut qp = vec![PowerSeries::one(order)];
    for j in 1..=poly.degree_q() as usize {
        let next = qp[j - 1].mul(&bq);
        qp.push(next);
    }

    let mut total = PowerSeries::zero(order);
    for (i, j, c) in poly.terms() {
        let s = shift(i, j) - lowest;
        if s > order {
            continue;
        }
        let term = pp[i as usize]
            .mul(&qp[j as usize])
            .scale(&num_rational::BigRational::from_integer(c.clone()))
            .shift(s)
            .truncate(order);
        total = total.add(&term);
    }
    debug_assert!(total.order() >= order);

    let first_failure = total.terms().next().map(|(e, c)| SeriesFailure { exponent: e + lowest, coefficient: c.to_string() });
    Ok(SeriesReport { order, lowest_exponent: lowest, verdict: Verdict::from_bool(first_failure.is_none()), first_failure })
}

#[derive(Clone, Debug, Serialize)]
pub struct Multiplier13Report {
    /// `m` against its expression in `α`, `β`.
    pub m_equation: Residual,
    /// `13/m` against the same expression with `α`, `β` swapped.
    pub reciprocal_equation: Residual,
    /// The two right-hand sides multiply to 13.
    pub product_check: Residual,
}

impl Multiplier13Report {
    pub fn passed(&self) -> bool {
        self.m_equation.passed() && self.reciprocal_equation.passed() && self.product_check.passed()
    }
}

fn quarter(x: &RealValue) -> Result<RealValue, BignumError> {
    x.pow_ratio(&Rational64::new(1, 4))
}

/// The degree-13 right-hand side as its separate terms.
fn multiplier_terms(a: &RealValue, b: &RealValue) -> Result<[RealValue; 4], BignumError> {
    let one = one(a.bits());
    let (ca, cb) = (one.sub(a), one.sub(b));
    let mixed = b.mul(&cb).div(&a.mul(&ca));
    Ok([
        quarter(&b.div(a))?,
        quarter(&cb.div(&ca))?,
        quarter(&mixed)?.neg(),
        mixed.pow_ratio(&Rational64::new(1, 6))?.mul_i64(-4),
    ])
}

fn normalised_difference(lhs: &RealValue, terms: &[RealValue]) -> RealValue {
    let mut sum = lhs.clone();
    let mut scale = lhs.abs();
    for t in terms {
        sum = sum.sub(t);
        if t.abs_cmp_value(&scale).is_gt() {
            scale = t.abs();
        }
    }
    sum.div(&scale)
}

fn multiplier13_at(q: &RealValue, tol: f64) -> Result<Multiplier13Report, BignumError> {
    let q13 = q.powi(13);
    let modulus = |x: &RealValue| -> Result<(RealValue, RealValue), BignumError> {
        let plus = eval_block_at(BlockKind::PhiPlus, x)?;
        let minus = eval_block_at(BlockKind::PhiMinus, x)?;
        let alpha = one(x.bits()).sub(&minus.div(&plus).powi(4));
        Ok((alpha, plus))
    };
    let (alpha, phi1) = modulus(q)?;
    let (beta, phi13) = modulus(&q13)?;
    let m = phi1.div(&phi13).square();
    let t1 = multiplier_terms(&alpha, &beta)?;
    let t2 = multiplier_terms(&beta, &alpha)?;
    let thirteen = RealValue::from_i64(13, q.bits());
    let rhs1 = t1.iter().fold(zero(q.bits()), |s, t| s.add(t));
    let rhs2 = t2.iter().fold(zero(q.bits()), |s, t| s.add(t));
    Ok(Multiplier13Report {
        m_equation: Residual::judge(normalised_difference(&m, &t1), tol),
        reciprocal_equation: Residual::judge(normalised_difference(&thirteen.div(&m), &t2), tol),
        product_check: Residual::judge(rhs1.mul(&rhs2).sub(&thirteen).div(&thirteen), tol),
    })
}

/// Checks both degree-13 multiplier equations at `q`, with
/// `α = 1 - (φ(-q)/φ(q))^4`, `β` likewise at `q^13` and `m = φ(q)^2/φ(q^13)^2`.
pub fn verify_multiplier13(q: &RealValue, prec: &PrecisionSpec) -> Result<Multiplier13Report, VerifyError> {
    let tol = tolerance_log10(prec);
    let mut last = None;
    for attempt in 0..MAX_RETRIES {
        let qb = q.with_bits(prec.widened(attempt).working_bits());
        let r = multiplier13_at(&qb, tol)?;
        if r.m_equation.resolved() && r.reciprocal_equation.resolved() && r.product_check.resolved() {
            return Ok(r);
        }
        last = Some(r);
    }
    Ok(last.expect("at least one attempt"))
}

#[cfg(test)]
mod tests {
    use super::super::Catalogue;
    use super::*;

    fn q(num: i64, den: i64, prec: &PrecisionSpec) -> RealValue {
        RealValue::from_ratio(&Rational64::new(num, den), prec.working_bits())
    }

    #[test]
    fn numeric_pass_and_negative_control() {
        let cat = Catalogue::builtin();
        let prec = PrecisionSpec::new(100);
        let rec = cat.get("lemma2.3.ii").unwrap();
        let r = verify_numeric(rec, &q(1, 10, &prec), &prec).unwrap();
        assert!(r.passed(), "residual 10^{}", r.magnitude_log10());

        let bad = cat.get("lemma2.3.i").unwrap().mutate_constant(9, 8).unwrap().unwrap();
        let r = verify_numeric(&bad, &q(1, 10, &prec), &prec).unwrap();
        assert!(!r.passed());
        assert!(r.magnitude_log10() > -10.0);
    }

    #[test]
    fn natural_nome_probe() {
        let cat = Catalogue::builtin();
        let rec = cat.get("thm3.1").unwrap();
        assert_eq!(natural_nome_index(rec), 13);
        assert_eq!(natural_nome_index(cat.get("lemma2.1").unwrap()), 1);
        assert_eq!(natural_nome_index(cat.get("lemma2.6.i").unwrap()), 5);
        let prec = PrecisionSpec::new(100);
        let qn = ProbePoint::NaturalNome { n: 13 }.value(prec.working_bits()).unwrap();
        assert!(verify_numeric(rec, &qn, &prec).unwrap().passed());
    }

    #[test]
    fn numeric_rejects_low_targets() {
        let cat = Catalogue::builtin();
        let prec = PrecisionSpec::new(30);
        let err = verify_numeric(&cat.records()[0], &q(1, 10, &prec), &prec).unwrap_err();
        assert_eq!(err, VerifyError::TargetTooLow(30));
    }

    #[test]
    fn series_pass_and_perturbed_polynomial() {
        let cat = Catalogue::builtin();
        for id in ["lemma2.1", "thm3.6"] {
            let r = verify_series(cat.get(id).unwrap(), 24 * 30).unwrap();
            assert!(r.passed(), "{id}: {r:?}");
        }
        let bad = cat.get("thm3.2").unwrap().mutate_constant(829, 830).unwrap().unwrap();
        let r = verify_series(&bad, 24 * 30).unwrap();
        let fail = r.first_failure.as_ref().expect("perturbation detected");
        assert!(fail.exponent <= r.checked_through());
        assert!(verify_series(&cat.records()[0], 10).is_err());
    }

    #[test]
    fn multiplier13_holds() {
        let prec = PrecisionSpec::new(80);
        let r = verify_multiplier13(&q(1, 20, &prec), &prec).unwrap();
        assert!(r.passed(), "{r:?}");
        let qn = ProbePoint::NaturalNome { n: 13 }.value(prec.working_bits()).unwrap();
        assert!(verify_multiplier13(&qn, &prec).unwrap().passed());
    }

    #[test]
    fn probe_labels() {
        assert_eq!(ProbePoint::Fixed { num: 1, den: 20 }.label(), "q=0.05");
        assert_eq!(ProbePoint::NaturalNome { n: 7 }.label(), "q=nome(1,7)");
    }
}

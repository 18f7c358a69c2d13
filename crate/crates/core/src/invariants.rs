//! Class invariants `g_n`, `G_n`: definitional evaluation, registry lookup and
//! companion solving.
//!
//! With `q = exp(-π√n)`,
//! `g_n = f(-q) / (2^{1/4} q^{1/24} f(-q²))` and
//! `G_n = f(q) / (2^{1/4} q^{1/24} f(-q²))`.

use std::fmt;

use num_rational::Rational64;
use serde::Serialize;
use thiserror::Error;

use crate::bignum::{self, eval_block_at, serialize_ratio, BignumError, Nome, PrecisionSpec, RealValue};
use crate::blocks::BlockKind;
use crate::radicals::{Quantity, RadicalError, RadicalExpr, Registry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum InvariantKind {
    #[serde(rename = "g")]
    SmallG,
    #[serde(rename = "G")]
    BigG,
}

impl InvariantKind {
    pub fn quantity(self, n: Rational64) -> Quantity {
        match self {
            InvariantKind::SmallG => Quantity::SmallG(n),
            InvariantKind::BigG => Quantity::BigG(n),
        }
    }
}

impl fmt::Display for InvariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InvariantKind::SmallG => "g",
            InvariantKind::BigG => "G",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum InvariantError {
    #[error(transparent)]
    Numeric(#[from] BignumError),
    #[error(transparent)]
    Radical(#[from] RadicalError),
    #[error("closed form for {id} disagrees with the definition ({digits:.1} digits)")]
    ClosedFormMismatch { id: String, digits: f64 },
    #[error("{relation}: Newton root {candidate:.17e} is not the bootstrap root {bootstrap:.17e}")]
    RootSelection { relation: Companion, bootstrap: f64, candidate: f64 },
}

fn eval_at(kind: InvariantKind, nm: &Nome) -> Result<RealValue, BignumError> {
    let bits = nm.q.bits();
    let num_kind = match kind {
        InvariantKind::SmallG => BlockKind::FMinus,
        InvariantKind::BigG => BlockKind::FPlus,
    };
    let num = eval_block_at(num_kind, &nm.q)?;
    let den = eval_block_at(BlockKind::FMinus, &nm.q.square())?;
    let scale = RealValue::from_i64(2, bits)
        .pow_ratio(&Rational64::new(1, 4))?
        .mul(&nm.power(&Rational64::new(1, 24)));
    Ok(num.div(&den.mul(&scale)))
}

pub fn invariant_numeric(kind: InvariantKind, n: Rational64, prec: &PrecisionSpec) -> Result<RealValue, BignumError> {
    bignum::adaptive(prec, |bits| eval_at(kind, &Nome::at_bits(n, Rational64::from_integer(1), bits)?))
}

pub fn g_numeric(n: Rational64, prec: &PrecisionSpec) -> Result<RealValue, BignumError> {
    invariant_numeric(InvariantKind::SmallG, n, prec)
}

pub fn big_g_numeric(n: Rational64, prec: &PrecisionSpec) -> Result<RealValue, BignumError> {
    invariant_numeric(InvariantKind::BigG, n, prec)
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantValue {
    pub kind: InvariantKind,
    #[serde(serialize_with = "serialize_ratio")]
    pub index: Rational64,
    pub closed_form: Option<RadicalExpr>,
    pub numeric: RealValue,
    pub source: String,
}

/// Looks up a printed invariant. `Ok(None)` is a lookup miss; a closed form
/// that disagrees with the definition is an error.
pub fn registry_lookup(
    registry: &Registry,
    kind: InvariantKind,
    n: Rational64,
    prec: &PrecisionSpec,
) -> Result<Option<InvariantValue>, InvariantError> {
    let Some(rec) = registry.single(&kind.quantity(n)) else {
        return Ok(None);
    };
    let numeric = invariant_numeric(kind, n, prec)?;
    let closed = rec.expr.eval(prec)?;
    if closed.sub(&numeric).abs().certainly_positive() {
        let digits = bignum::digits_agreement(&closed, &numeric, f64::from(prec.working_digits()));
        return Err(InvariantError::ClosedFormMismatch { id: rec.id.clone(), digits });
    }
    Ok(Some(InvariantValue { kind, index: n, closed_form: Some(rec.expr.clone()), numeric, source: rec.source.clone() }))
}

// ---------------------------------------------------------------------------
// companion relations
// ---------------------------------------------------------------------------

/// A polynomial relation tying an unknown invariant to a known one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Companion {
    /// `2√2((K u)³ + (K u)⁻³) = (K/u)⁶ − (u/K)⁶` with `K = g_{3n}`, `u = g_{n/3}`.
    Triple3,
    /// `X⁴ − 2X²B⁴ − 2B² = 0` with `X = g_{4n}g_{36n}`, `B = g_n g_{9n}`.
    Quad4_36,
    /// `8((K u)⁶ + (K u)⁻⁶) = D⁷ − 6D⁵ + D³ + 20D`, `D = K/u − u/K`, with
    /// `K = g_{13n}`, `u = g_{n/13}`.
    Deg13,
}

impl fmt::Display for Companion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Companion::Triple3 => "triple3",
            Companion::Quad4_36 => "quad4_36",
            Companion::Deg13 => "deg13",
        })
    }
}

impl std::str::FromStr for Companion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "triple3" => Ok(Companion::Triple3),
            "quad4_36" => Ok(Companion::Quad4_36),
            "deg13" => Ok(Companion::Deg13),
            other => Err(format!("unknown companion relation `{other}`")),
        }
    }
}

/// The known side of a companion relation.
#[derive(Clone, Debug)]
pub enum Known {
    Value(RealValue),
    /// `B = 1/X`, as in `g_3 g_{1/3} = (g_12 g_{4/3})⁻¹`.
    ReciprocalOfUnknown,
}

impl Companion {
    /// The index of the known invariant at parameter `n` (for `Quad4_36`,
    /// the pair `g_n g_{9n}`).
    pub fn known_indices(self, n: Rational64) -> Vec<Rational64> {
        match self {
            Companion::Triple3 => vec![n * 3],
            Companion::Quad4_36 => vec![n, n * 9],
            Companion::Deg13 => vec![n * 13],
        }
    }

    /// Indices whose product is the unknown.
    pub fn unknown_indices(self, n: Rational64) -> Vec<Rational64> {
        match self {
            Companion::Triple3 => vec![n / 3],
            Companion::Quad4_36 => vec![n * 4, n * 36],
            Companion::Deg13 => vec![n / 13],
        }
    }

    fn residual(self, k: &Dual, u: &Dual, bits: usize) -> Dual {
        match self {
            Companion::Triple3 => {
                let p3 = k.mul(u).powi(3);
                let r6 = k.div(u).powi(6);
                let two_rt2 = Dual::cst(RealValue::from_i64(8, bits).sqrt().expect("positive"), bits);
                two_rt2.mul(&p3.add(&p3.recip())).sub(&r6.sub(&r6.recip()))
            }
            Companion::Quad4_36 => {
                let x2 = u.powi(2);
                let b2 = k.powi(2);
                x2.powi(2).sub(&x2.mul(&b2.powi(2)).scale(2)).sub(&b2.scale(2))
            }
            Companion::Deg13 => {
                let p6 = k.mul(u).powi(6);
                let r = k.div(u);
                let d = r.sub(&r.recip());
                let rhs = d.powi(7).sub(&d.powi(5).scale(6)).add(&d.powi(3)).add(&d.scale(20));
                p6.add(&p6.recip()).scale(8).sub(&rhs)
            }
        }
    }
}

/// A value with its derivative in one variable.
#[derive(Clone, Debug)]
struct Dual {
    v: RealValue,
    d: RealValue,
}

impl Dual {
    fn var(v: RealValue) -> Self {
        let bits = v.bits();
        Dual { v, d: bignum::one(bits) }
    }

    fn cst(v: RealValue, bits: usize) -> Self {
        Dual { v, d: bignum::zero(bits) }
    }

    fn add(&self, o: &Self) -> Self {
        Dual { v: self.v.add(&o.v), d: self.d.add(&o.d) }
    }

    fn sub(&self, o: &Self) -> Self {
        Dual { v: self.v.sub(&o.v), d: self.d.sub(&o.d) }
    }

    fn mul(&self, o: &Self) -> Self {
        Dual { v: self.v.mul(&o.v), d: self.d.mul(&o.v).add(&self.v.mul(&o.d)) }
    }

    fn recip(&self) -> Self {
        let inv = self.v.recip();
        Dual { d: self.d.mul(&inv.square()).neg(), v: inv }
    }

    fn div(&self, o: &Self) -> Self {
        self.mul(&o.recip())
    }

    fn scale(&self, k: i64) -> Self {
        Dual { v: self.v.mul_i64(k), d: self.d.mul_i64(k) }
    }

    fn powi(&self, e: i64) -> Self {
        Dual { v: self.v.powi(e), d: self.d.mul(&self.v.powi(e - 1)).mul_i64(e) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompanionSolution {
    pub relation: Companion,
    #[serde(serialize_with = "serialize_ratio")]
    pub n: Rational64,
    pub value: RealValue,
    /// `|F(u)|` at the returned root.
    pub residual: RealValue,
    pub bootstrap: f64,
}

const BOOTSTRAP_REL_TOL: f64 = 1e-15;

/// Solves `relation` at parameter `n` for the unknown, starting Newton's
/// method from the definitional value at bootstrap precision. A known value
/// must be supplied to at least the working precision of `prec`.
pub fn solve_companion(
    relation: Companion,
    known: &Known,
    n: Rational64,
    prec: &PrecisionSpec,
) -> Result<CompanionSolution, InvariantError> {
    let boot_prec = PrecisionSpec::bootstrap();
    let mut boot = bignum::one(boot_prec.working_bits());
    for idx in relation.unknown_indices(n) {
        boot = boot.mul(&g_numeric(idx, &boot_prec)?);
    }
    let bootstrap = boot.to_f64();

    let bits = match known {
        Known::Value(k) => k.bits(),
        Known::ReciprocalOfUnknown => prec.working_bits(),
    };
    let k_exact = match known {
        Known::Value(k) => Some(k.midpoint()),
        Known::ReciprocalOfUnknown => None,
    };
    let f_at = |u: &RealValue| -> Dual {
        let ud = Dual::var(u.clone());
        let kd = match &k_exact {
            Some(k) => Dual::cst(k.clone(), bits),
            None => ud.recip(),
        };
        relation.residual(&kd, &ud, bits)
    };

    let mut u = boot.with_bits(bits).midpoint();
    let stop = -(bits as f64) * std::f64::consts::LOG10_2 + 5.0;
    for _ in 0..200 {
        let f = f_at(&u);
        let step = f.v.div(&f.d).midpoint();
        u = u.sub(&step).midpoint();
        let rel = step.log10_abs().unwrap_or(f64::NEG_INFINITY) - u.log10_abs().unwrap_or(0.0);
        if rel < stop {
            break;
        }
    }

    let candidate = u.to_f64();
    if !u.is_positive() || ((candidate - bootstrap) / bootstrap).abs() > BOOTSTRAP_REL_TOL {
        return Err(InvariantError::RootSelection { relation, bootstrap, candidate });
    }

    // Linearised bound: 2|F(u)|/|F'(u)| for the root itself, plus the
    // sensitivity to the known value times its error.
    let f = f_at(&u);
    let mut value = u.widen_by(&f.v.mul_i64(2).div(&f.d));
    if let Known::Value(k) = known {
        let kd = Dual::var(k.midpoint());
        let fk = relation.residual(&kd, &Dual::cst(u.clone(), bits), bits);
        value = value.widen_by(&fk.d.div(&f.d).mul(&k.error_value()));
    }
    if !value.error_within_digits(prec.target_digits) {
        return Err(BignumError::PrecisionExhausted {
            target: prec.target_digits,
            achieved: value.error_log10().unwrap_or(f64::NEG_INFINITY),
        }
        .into());
    }
    Ok(CompanionSolution { relation, n, value, residual: f.v.abs(), bootstrap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bignum::digits_agreement;
    use crate::radicals::parse_radical;

    fn r(p: i64, q: i64) -> Rational64 {
        Rational64::new(p, q)
    }

    fn closed(text: &str, prec: &PrecisionSpec) -> RealValue {
        parse_radical(text).unwrap().eval(prec).unwrap()
    }

    #[test]
    fn product_relations() {
        let prec = PrecisionSpec::new(60);
        let p = g_numeric(r(6, 1), &prec).unwrap().mul(&g_numeric(r(2, 3), &prec).unwrap());
        assert!(digits_agreement(&p, &bignum::one(p.bits()), 80.0) >= 60.0);
        let p = g_numeric(r(12, 1), &prec).unwrap().mul(&g_numeric(r(4, 3), &prec).unwrap());
        assert!(digits_agreement(&p, &closed("2^(1/3)", &prec), 80.0) >= 60.0);
    }

    #[test]
    fn g30_matches_table() {
        let prec = PrecisionSpec::new(60);
        let g = g_numeric(r(30, 1), &prec).unwrap();
        assert!(digits_agreement(&g, &closed("(sqrt(5)+2)^(1/6)*(sqrt(10)+3)^(1/6)", &prec), 80.0) >= 60.0);
    }

    #[test]
    fn big_g_reference() {
        // G_1 = 1 and G_5 = ((1+√5)/2)^(1/4)
        let prec = PrecisionSpec::new(40);
        let g1 = big_g_numeric(r(1, 1), &prec).unwrap();
        assert!(digits_agreement(&g1, &bignum::one(g1.bits()), 60.0) >= 40.0);
        let g5 = big_g_numeric(r(5, 1), &prec).unwrap();
        assert!(digits_agreement(&g5, &closed("((1+sqrt(5))/2)^(1/4)", &prec), 60.0) >= 40.0);
    }

    #[test]
    fn lookup_hits_and_misses() {
        let reg = Registry::builtin();
        let prec = PrecisionSpec::new(40);
        let v = registry_lookup(&reg, InvariantKind::SmallG, r(78, 1), &prec).unwrap().unwrap();
        assert_eq!(v.closed_form.unwrap().to_string(), "(sqrt(26)+5)^(1/6)*((sqrt(13)+3)/2)^(1/2)");
        assert!(registry_lookup(&reg, InvariantKind::SmallG, r(10, 3), &prec).unwrap().is_some());
        assert!(registry_lookup(&reg, InvariantKind::BigG, r(7, 1), &prec).unwrap().is_none());

        let bad = Registry::parse("g 30 = (sqrt(5)+2)^(1/6)").unwrap();
        assert!(matches!(
            registry_lookup(&bad, InvariantKind::SmallG, r(30, 1), &prec),
            Err(InvariantError::ClosedFormMismatch { .. })
        ));
    }

    #[test]
    fn triple3_gives_g_10_3() {
        let prec = PrecisionSpec::new(60);
        let k = closed("(sqrt(5)+2)^(1/6)*(sqrt(10)+3)^(1/6)", &prec.widened(1));
        let sol = solve_companion(Companion::Triple3, &Known::Value(k), r(10, 1), &prec).unwrap();
        let want = closed("(sqrt(5)-2)^(1/6)*(sqrt(10)+3)^(1/6)", &prec);
        assert!(digits_agreement(&sol.value, &want, 80.0) >= 60.0);
        assert!(sol.residual.log10_abs().unwrap_or(f64::NEG_INFINITY) < -45.0);
    }

    #[test]
    fn deg13_gives_g_6_13() {
        let prec = PrecisionSpec::new(60);
        let k = closed("(sqrt(26)+5)^(1/6)*((sqrt(13)+3)/2)^(1/2)", &prec.widened(1));
        let sol = solve_companion(Companion::Deg13, &Known::Value(k), r(6, 1), &prec).unwrap();
        let want = closed("(sqrt(26)+5)^(1/6)*((sqrt(13)-3)/2)^(1/2)", &prec);
        assert!(digits_agreement(&sol.value, &want, 80.0) >= 60.0);
    }

    #[test]
    fn quad4_36_reciprocal_case() {
        let prec = PrecisionSpec::new(60);
        let sol = solve_companion(Companion::Quad4_36, &Known::ReciprocalOfUnknown, r(1, 3), &prec).unwrap();
        assert!(digits_agreement(&sol.value, &closed("2^(1/3)", &prec), 80.0) >= 60.0);
    }

    #[test]
    fn quad4_36_with_unit_pair() {
        // n = 2/3: g_{2/3} g_6 = 1, so X² = 1 + √3 for X = g_{8/3} g_24
        let prec = PrecisionSpec::new(50);
        let sol = solve_companion(Companion::Quad4_36, &Known::Value(bignum::one(prec.working_bits())), r(2, 3), &prec)
            .unwrap();
        assert!(digits_agreement(&sol.value, &closed("(1+sqrt(3))^(1/2)", &prec), 70.0) >= 50.0);
    }

    #[test]
    fn wrong_known_value_is_a_root_selection_failure() {
        let prec = PrecisionSpec::new(30);
        let k = RealValue::from_i64(3, prec.working_bits());
        let err = solve_companion(Companion::Triple3, &Known::Value(k), r(10, 1), &prec).unwrap_err();
        assert!(matches!(err, InvariantError::RootSelection { .. }), "{err}");
    }
}

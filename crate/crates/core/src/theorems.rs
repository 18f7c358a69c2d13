//! General evaluation of `a_{m,n}` for `n = 3, 5, 7, 13` from class invariants.
//!
//! Each family fixes an invariant combination `Λ`; two equations in `Λ` then
//! determine `a_{m,n}/b_{4m,n}` and `a_{m,n} b_{4m,n}` (or their square roots)
//! up to a choice of root, which is settled against a low-precision direct
//! evaluation of `a` and `b`.

use std::fmt;

use num_rational::Rational64;
use serde::Serialize;
use thiserror::Error;

use crate::bignum::{self, digits_agreement, serialize_ratio, BignumError, PrecisionSpec, RealValue};
use crate::invariants::{g_numeric, solve_companion, Companion, InvariantError, Known};
use crate::products::{a_numeric, b_numeric, ProductError};
use crate::radicals::{CombineOp, CorollaryError, Quantity, RadicalError, Registry, Target};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    N3,
    N5,
    N7,
    N13,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::N3, Family::N5, Family::N7, Family::N13];

    pub fn degree(self) -> i64 {
        match self {
            Family::N3 => 3,
            Family::N5 => 5,
            Family::N7 => 7,
            Family::N13 => 13,
        }
    }

    pub fn from_degree(n: Rational64) -> Option<Family> {
        Family::ALL.into_iter().find(|f| Rational64::from_integer(f.degree()) == n)
    }

    /// Whether the ratio and product unknowns are square roots of `a/b`, `ab`.
    fn uses_square_roots(self) -> bool {
        matches!(self, Family::N5 | Family::N13)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.degree())
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.to_string() == s)
            .ok_or_else(|| format!("unknown family `{s}` (expected n3, n5, n7 or n13)"))
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TheoremError {
    #[error(transparent)]
    Numeric(#[from] BignumError),
    #[error(transparent)]
    Product(#[from] ProductError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error(transparent)]
    Radical(#[from] RadicalError),
    #[error("no closed form available for {}", needed.join(", "))]
    Unavailable { needed: Vec<String> },
    #[error("{stage} root selection failed: candidates {candidates:?}, bootstrap {bootstrap:.17e}")]
    RootSelection { stage: &'static str, candidates: Vec<f64>, bootstrap: f64 },
    #[error("{stage} equation has no real root")]
    NoRealRoot { stage: &'static str },
    #[error("`{0}` is not a registry record of a_(m,n) with n in 3, 5, 7, 13")]
    NotReproducible(String),
}

impl From<CorollaryError> for TheoremError {
    fn from(e: CorollaryError) -> Self {
        match e {
            CorollaryError::Radical(e) => TheoremError::Radical(e),
            CorollaryError::Numeric(e) => TheoremError::Numeric(e),
            CorollaryError::Product(e) => TheoremError::Product(e),
        }
    }
}

// ---------------------------------------------------------------------------
// Lambda
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPolicy {
    /// Use closed forms where possible, otherwise definitional values.
    PreferClosedForm,
    ClosedFormOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRoute {
    /// A printed value of the whole invariant combination.
    RegistryCombination,
    /// A printed invariant plus a solved companion.
    Companion(Companion),
    /// Printed values of both invariants.
    RegistrySingles,
    /// Definitional evaluation only.
    Numeric,
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaConstruction {
    pub route: LambdaRoute,
    /// Human-readable description of each input, in order of use.
    pub inputs: Vec<String>,
    pub numeric_only: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaValue {
    pub family: Family,
    #[serde(serialize_with = "serialize_ratio")]
    pub m: Rational64,
    pub value: RealValue,
    pub construction: LambdaConstruction,
}

fn gid(n: Rational64) -> String {
    Quantity::SmallG(n).id()
}

/// Index pairs `(x, y)` with a printed relation `g_x g_y = 1/(g_{4x} g_{36x})`
/// (taking `x = 1/3`, `y = 3`).
const RECIPROCAL_PAIRS: [(i64, i64); 1] = [(1, 3)];

struct Closed<'a> {
    reg: &'a Registry,
    prec: PrecisionSpec,
}

impl Closed<'_> {
    fn single(&self, n: Rational64) -> Result<Option<(RealValue, String)>, TheoremError> {
        match self.reg.single(&Quantity::SmallG(n)) {
            Some(rec) => Ok(Some((rec.expr.eval(&self.prec)?, format!("{} from registry ({})", rec.id, rec.source)))),
            None => Ok(None),
        }
    }

    fn combination(&self, x: Rational64, y: Rational64, op: CombineOp) -> Result<Option<(RealValue, String)>, TheoremError> {
        let (qx, qy) = (Quantity::SmallG(x), Quantity::SmallG(y));
        let mut found = self.reg.combination(&qx, op, &qy).map(|r| (r, false));
        if found.is_none() && op == CombineOp::Mul {
            found = self.reg.combination(&qy, op, &qx).map(|r| (r, false));
        }
        if found.is_none() && op == CombineOp::Div {
            found = self.reg.combination(&qy, op, &qx).map(|r| (r, true));
        }
        match found {
            Some((rec, inverted)) => {
                let v = rec.expr.eval(&self.prec)?;
                let v = if inverted { v.recip() } else { v };
                Ok(Some((v, format!("{} from registry ({})", rec.id, rec.source))))
            }
            None => Ok(None),
        }
    }
}

/// `Λ` for `family` at `m`, built by the first available route: a printed
/// combination, a printed invariant with a solved companion, printed values
/// of both invariants, or (if allowed) definitional values.
pub fn lambda_value(
    family: Family,
    m: Rational64,
    registry: &Registry,
    prec: &PrecisionSpec,
    policy: LambdaPolicy,
) -> Result<LambdaValue, TheoremError> {
    let inner = PrecisionSpec::new(prec.working_digits());
    let closed = Closed { reg: registry, prec: inner.widened(1) };
    let k = Rational64::from_integer(family.degree());
    let (hi, lo) = (m * k, m / k);
    let op = if family == Family::N3 { CombineOp::Mul } else { CombineOp::Div };
    let combine = |x: &RealValue, y: &RealValue| match op {
        CombineOp::Mul => x.mul(y),
        CombineOp::Div => x.div(y),
    };

    let mut found: Option<(RealValue, LambdaRoute, Vec<String>)> = None;
    if let Some((v, desc)) = closed.combination(hi, lo, op)? {
        found = Some((v, LambdaRoute::RegistryCombination, vec![desc]));
    }
    if found.is_none() {
        let companion = match family {
            Family::N3 => Some(Companion::Triple3),
            Family::N13 => Some(Companion::Deg13),
            _ => None,
        };
        if let (Some(rel), Some((kv, desc))) = (companion, closed.single(hi)?) {
            let sol = solve_companion(rel, &Known::Value(kv.clone()), m, &inner)?;
            let inputs = vec![desc, format!("{} by {rel} from {}", gid(lo), gid(hi))];
            found = Some((combine(&kv, &sol.value), LambdaRoute::Companion(rel), inputs));
        }
    }
    if found.is_none() && family == Family::N3 {
        // g_{3m} g_{m/3} = g_{4x} g_{36x} at x = m/12
        let x = m / 12;
        let known = if RECIPROCAL_PAIRS.iter().any(|&(p, q)| x == Rational64::new(p, q)) {
            Some((Known::ReciprocalOfUnknown, format!("{}*{} = 1/({}*{})", gid(x), gid(x * 9), gid(lo), gid(hi))))
        } else {
            closed.combination(x, x * 9, CombineOp::Mul)?.map(|(v, d)| (Known::Value(v), d))
        };
        if let Some((known, desc)) = known {
            let sol = solve_companion(Companion::Quad4_36, &known, x, &inner)?;
            let inputs = vec![desc, format!("{}*{} by quad4_36 at n = {x}", gid(hi), gid(lo))];
            found = Some((sol.value, LambdaRoute::Companion(Companion::Quad4_36), inputs));
        }
    }
    if found.is_none() {
        if let (Some((h, dh)), Some((l, dl))) = (closed.single(hi)?, closed.single(lo)?) {
            found = Some((combine(&h, &l), LambdaRoute::RegistrySingles, vec![dh, dl]));
        }
    }
    let (core, route, inputs) = match found {
        Some(f) => f,
        None => {
            if policy == LambdaPolicy::ClosedFormOnly {
                let mut needed = Vec::new();
                for n in [hi, lo] {
                    if registry.single(&Quantity::SmallG(n)).is_none() {
                        needed.push(gid(n));
                    }
                }
                return Err(TheoremError::Unavailable { needed });
            }
            let h = g_numeric(hi, &inner)?;
            let l = g_numeric(lo, &inner)?;
            let inputs = vec![format!("{} definitional", gid(hi)), format!("{} definitional", gid(lo))];
            (combine(&h, &l), LambdaRoute::Numeric, inputs)
        }
    };

    let bits = core.bits();
    let value = match family {
        Family::N3 => RealValue::from_i64(2, bits).sqrt()?.mul(&core).powi(3),
        Family::N5 => core.powi(3),
        Family::N7 => core.powi(2),
        Family::N13 => core,
    };
    let numeric_only = route == LambdaRoute::Numeric;
    Ok(LambdaValue { family, m, value, construction: LambdaConstruction { route, inputs, numeric_only } })
}

// ---------------------------------------------------------------------------
// solving
// ---------------------------------------------------------------------------

/// `Z = v`, or `c2 Z² + c1 Z + c0 = 0`.
enum Equation {
    Linear(RealValue),
    Quadratic([RealValue; 3]),
}

impl Equation {
    fn roots(&self, stage: &'static str) -> Result<Vec<RealValue>, TheoremError> {
        match self {
            Equation::Linear(v) => Ok(vec![v.clone()]),
            Equation::Quadratic([c0, c1, c2]) => {
                let disc = c1.square().sub(&c2.mul(c0).mul_i64(4));
                let two_a = c2.mul_i64(2);
                if disc.neg().certainly_positive() {
                    return Err(TheoremError::NoRealRoot { stage });
                }
                if !disc.certainly_positive() {
                    // numerically a double root: centre plus sqrt of the disc's width
                    let width = disc.abs().midpoint().add(&disc.error_value()).sqrt()?.div(&two_a.abs());
                    return Ok(vec![c1.neg().div(&two_a).widen_by(&width)]);
                }
                let s = disc.sqrt()?;
                Ok(vec![c1.neg().add(&s).div(&two_a), c1.neg().sub(&s).div(&two_a)])
            }
        }
    }

    /// `|lhs - rhs|` scaled by the largest term.
    fn residual(&self, z: &RealValue) -> RealValue {
        let bits = z.bits();
        let (diff, terms) = match self {
            Equation::Linear(v) => (z.sub(v), vec![z.clone(), v.clone(), bignum::one(bits)]),
            Equation::Quadratic([c0, c1, c2]) => {
                let t = [c2.mul(&z.square()), c1.mul(z), c0.clone()];
                (t[0].add(&t[1]).add(&t[2]), t.to_vec())
            }
        };
        let scale = terms.iter().map(|t| t.abs()).max_by(|a, b| a.cmp_value(b)).expect("nonempty");
        diff.abs().div(&scale)
    }
}

/// `Σ c_i D^{e_i}`.
fn poly(d: &RealValue, terms: &[(i64, i64)]) -> RealValue {
    terms.iter().fold(bignum::zero(d.bits()), |acc, &(e, c)| acc.add(&d.powi(e).mul_i64(c)))
}

/// The two defining equations: the first in the ratio unknown `X`, the second
/// in the product unknown `Y`.
fn equations(family: Family, lambda: &RealValue) -> (Equation, Equation) {
    let bits = lambda.bits();
    let int = |v: i64| RealValue::from_i64(v, bits);
    let d = lambda.sub(&lambda.recip());
    match family {
        Family::N3 => {
            let y = poly(lambda, &[(4, 1), (2, 11), (0, -8)]).div(&lambda.mul_i64(9));
            (Equation::Linear(lambda.clone()), Equation::Linear(y))
        }
        Family::N5 => (
            Equation::Quadratic([int(4), d.neg(), int(1)]),
            Equation::Quadratic([
                poly(&d, &[(4, 1), (2, -37), (0, -64)]).neg(),
                poly(&d, &[(3, 1), (1, -6)]).mul_i64(-5),
                int(25),
            ]),
        ),
        Family::N7 => (
            Equation::Quadratic([d.square().mul_i64(8), poly(&d, &[(3, 1), (1, -5)]).neg(), int(1)]),
            Equation::Quadratic([
                poly(&d, &[(12, 1), (10, -20), (8, 86), (6, -2065), (4, -16317), (2, -22981)]).neg(),
                poly(&d, &[(9, 1), (7, -7), (5, -37), (3, 77), (1, 294)]).mul_i64(-49),
                int(2401),
            ]),
        ),
        Family::N13 => (
            Equation::Quadratic([poly(&d, &[(2, 4), (0, 4)]), poly(&d, &[(3, 1), (1, -1)]).neg(), int(1)]),
            Equation::Quadratic([
                poly(&d, &[(12, 1), (10, -4), (8, -26), (6, -89), (4, -829), (2, -1821), (0, -576)]).neg(),
                poly(&d, &[(9, 1), (7, 1), (5, -21), (3, -35), (1, 30)]).mul_i64(-13),
                int(169),
            ]),
        ),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolvedPair {
    pub family: Family,
    #[serde(serialize_with = "serialize_ratio")]
    pub m: Rational64,
    /// `a_{m,n}`.
    pub a_value: RealValue,
    /// `b_{4m,n}`.
    pub b_value: RealValue,
    /// Selected `w` with `w - 1/w = X`: `a/b` or `√(a/b)`.
    pub ratio_root: RealValue,
    /// Selected `v` with `1/v - v = Y`: `ab` or `√(ab)`.
    pub product_root: RealValue,
    pub ratio_candidates: Vec<f64>,
    pub product_candidates: Vec<f64>,
    pub ratio_residual: RealValue,
    pub product_residual: RealValue,
}

const SELECTION_REL_TOL: f64 = 1e-15;

/// Roots `w` of `w² - s z w - 1 = 0` over every candidate `z`, paired with `z`.
fn unit_roots(zs: &[RealValue], sign: i64) -> Result<Vec<(RealValue, RealValue)>, TheoremError> {
    let mut out = Vec::new();
    for z in zs {
        let sz = z.mul_i64(sign);
        let s = sz.square().add(&RealValue::from_i64(4, z.bits())).sqrt()?;
        for w in [sz.add(&s), sz.sub(&s)] {
            out.push((z.clone(), w.div(&RealValue::from_i64(2, z.bits()))));
        }
    }
    Ok(out)
}

fn select(
    stage: &'static str,
    candidates: Vec<(RealValue, RealValue)>,
    bootstrap: f64,
) -> Result<(RealValue, RealValue, Vec<f64>), TheoremError> {
    let floats: Vec<f64> = candidates.iter().map(|(_, w)| w.to_f64()).collect();
    let best = floats
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - bootstrap).abs().total_cmp(&(b.1 - bootstrap).abs()))
        .map(|(i, _)| i)
        .expect("at least one candidate");
    if ((floats[best] - bootstrap) / bootstrap).abs() > SELECTION_REL_TOL {
        return Err(TheoremError::RootSelection { stage, candidates: floats, bootstrap });
    }
    let (z, w) = candidates.into_iter().nth(best).expect("index in range");
    Ok((z, w, floats))
}

/// Solves the family's two equations at `Λ` and recovers `a_{m,n}` and
/// `b_{4m,n}`, choosing each root by the 20-digit direct evaluation.
pub fn solve_pair(lambda: &LambdaValue, prec: &PrecisionSpec) -> Result<SolvedPair, TheoremError> {
    let family = lambda.family;
    let m = lambda.m;
    let n = Rational64::from_integer(family.degree());
    let boot = PrecisionSpec::bootstrap();
    let a0 = a_numeric(m, n, &boot)?.value.to_f64();
    let b0 = b_numeric(m * 4, n, &boot)?.value.to_f64();
    let roots = family.uses_square_roots();
    let (w_boot, v_boot) = if roots { ((a0 / b0).sqrt(), (a0 * b0).sqrt()) } else { (a0 / b0, a0 * b0) };

    let (eq_x, eq_y) = equations(family, &lambda.value);
    let (x, w, ratio_candidates) = select("ratio", unit_roots(&eq_x.roots("ratio")?, 1)?, w_boot)?;
    let (y, v, product_candidates) = select("product", unit_roots(&eq_y.roots("product")?, -1)?, v_boot)?;

    let (r, p) = if roots { (w.square(), v.square()) } else { (w.clone(), v.clone()) };
    let a_value = r.mul(&p).sqrt()?;
    let b_value = p.div(&r).sqrt()?;

    // back-substitution through a and b
    let (ab_ratio, ab_prod) = (a_value.div(&b_value), a_value.mul(&b_value));
    let (wr, vp) = if roots { (ab_ratio.sqrt()?, ab_prod.sqrt()?) } else { (ab_ratio, ab_prod) };
    let x_back = wr.sub(&wr.recip());
    let y_back = vp.recip().sub(&vp);
    debug_assert!(x.sub(&x_back).abs().to_f64() < 1e-10 && y.sub(&y_back).abs().to_f64() < 1e-10);
    let ratio_residual = eq_x.residual(&x_back);
    let product_residual = eq_y.residual(&y_back);
    if !a_value.error_within_digits(prec.target_digits) || !b_value.error_within_digits(prec.target_digits) {
        let worst = [&a_value, &b_value].iter().filter_map(|v| v.error_log10()).fold(f64::NEG_INFINITY, f64::max);
        return Err(BignumError::PrecisionExhausted { target: prec.target_digits, achieved: worst }.into());
    }

    Ok(SolvedPair {
        family,
        m,
        a_value,
        b_value,
        ratio_root: w,
        product_root: v,
        ratio_candidates,
        product_candidates,
        ratio_residual,
        product_residual,
    })
}

// ---------------------------------------------------------------------------
// reproduction
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ReproductionReport {
    pub id: String,
    pub family: Family,
    #[serde(serialize_with = "serialize_ratio")]
    pub m: Rational64,
    pub source: String,
    pub lambda: Option<LambdaValue>,
    pub pipeline: Option<SolvedPair>,
    pub closed_form: Option<RealValue>,
    pub direct: Option<RealValue>,
    pub pipeline_vs_closed: Option<f64>,
    pub pipeline_vs_direct: Option<f64>,
    pub closed_vs_direct: Option<f64>,
    /// Legs that could not be computed, with the reason.
    pub missing: Vec<String>,
    pub target_digits: u32,
    pub residual_tolerance_log10: f64,
}

impl ReproductionReport {
    /// The smallest pairwise agreement, if all three legs are present.
    pub fn three_way_digits(&self) -> Option<f64> {
        Some(self.pipeline_vs_closed?.min(self.pipeline_vs_direct?).min(self.closed_vs_direct?))
    }

    pub fn residuals_ok(&self) -> bool {
        self.pipeline.as_ref().is_some_and(|p| {
            [&p.ratio_residual, &p.product_residual]
                .iter()
                .all(|r| r.log10_abs().is_none_or(|l| l <= self.residual_tolerance_log10))
        })
    }

    pub fn passed(&self) -> bool {
        self.missing.is_empty()
            && self.residuals_ok()
            && self.three_way_digits().is_some_and(|d| d >= f64::from(self.target_digits))
    }
}

/// Runs `Λ → solve_pair` for a registry value `a_{m,n}` and compares the result
/// with the printed closed form and the direct evaluation.
pub fn reproduce_corollary(
    id: &str,
    registry: &Registry,
    prec: &PrecisionSpec,
) -> Result<ReproductionReport, TheoremError> {
    let rec = registry.get(id).ok_or_else(|| TheoremError::NotReproducible(id.to_string()))?;
    let Target::Single(Quantity::A { m, n }) = rec.target else {
        return Err(TheoremError::NotReproducible(id.to_string()));
    };
    let family = Family::from_degree(n).ok_or_else(|| TheoremError::NotReproducible(id.to_string()))?;
    let cap = f64::from(prec.working_digits());
    let mut missing = Vec::new();

    // Near a double root the pipeline loses half its digits; rebuild Λ at a
    // higher precision until a and b reach the target.
    let (mut lambda, mut pipeline) = (None, None);
    let mut lambda_prec = *prec;
    for attempt in 0..3 {
        let l = match lambda_value(family, m, registry, &lambda_prec, LambdaPolicy::PreferClosedForm) {
            Ok(l) => l,
            Err(e) => {
                missing.push(format!("lambda: {e}"));
                break;
            }
        };
        match solve_pair(&l, prec) {
            Ok(p) => pipeline = Some(p),
            Err(TheoremError::Numeric(BignumError::PrecisionExhausted { .. })) if attempt < 2 => {
                lambda_prec = PrecisionSpec::new(lambda_prec.working_digits() * 2);
                continue;
            }
            Err(e) => missing.push(format!("pipeline: {e}")),
        }
        lambda = Some(l);
        break;
    }
    let closed_form = rec.expr.eval(prec).map_err(|e| missing.push(format!("closed form: {e}"))).ok();
    let direct = a_numeric(m, n, prec).map(|v| v.value).map_err(|e| missing.push(format!("direct: {e}"))).ok();

    let agree = |x: Option<&RealValue>, y: Option<&RealValue>| Some(digits_agreement(x?, y?, cap));
    let pa = pipeline.as_ref().map(|p| &p.a_value);
    Ok(ReproductionReport {
        id: rec.id.clone(),
        family,
        m,
        source: rec.source.clone(),
        pipeline_vs_closed: agree(pa, closed_form.as_ref()),
        pipeline_vs_direct: agree(pa, direct.as_ref()),
        closed_vs_direct: agree(closed_form.as_ref(), direct.as_ref()),
        lambda,
        pipeline,
        closed_form,
        direct,
        missing,
        target_digits: prec.target_digits,
        residual_tolerance_log10: -(f64::from(prec.target_digits) - 15.0),
    })
}

/// Registry ids that `reproduce_corollary` accepts, in registry order.
pub fn reproducible_ids(registry: &Registry) -> Vec<String> {
    registry
        .records()
        .iter()
        .filter(|r| matches!(r.target, Target::Single(Quantity::A { n, .. }) if Family::from_degree(n).is_some()))
        .map(|r| r.id.clone())
        .collect()
}

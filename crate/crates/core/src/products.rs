//! The theta-function products `a_{m,n}` and `b_{m,n}` at `q = exp(-π√(m/n))`.
//!
//! `a` is evaluated three ways and `b` two ways; all forms are exact
//! identities, so a disagreement beyond the error bounds is reported as an
//! error rather than a verdict.

use std::fmt;

use num_rational::Rational64;
use serde::Serialize;
use thiserror::Error;

use crate::bignum::{self, eval_block_at, serialize_ratio, BignumError, Nome, PrecisionSpec, RealValue};
use crate::blocks::BlockKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductKind {
    A,
    B,
}

impl fmt::Display for ProductKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProductKind::A => "a",
            ProductKind::B => "b",
        })
    }
}

/// A definitional form of `a` or `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// `n q^((n-1)/4) ψ²(q^n) φ²(-q^{2n}) / (ψ²(q) φ²(-q²))`
    ATheta,
    /// `n q^((n-1)/4) ψ²(-q^n) φ²(q^n) / (ψ²(-q) φ²(q))`
    AThetaAlt,
    /// `n (q^((n-1)/8) f(q^n) f(-q^{2n}) / (f(q) f(-q²)))²`
    AEta,
    /// `n q^((n-1)/4) ψ²(q^n) φ²(-q^n) / (ψ²(q) φ²(-q))`
    BTheta,
    /// `n (q^((n-1)/8) f(-q^n) f(-q^{2n}) / (f(-q) f(-q²)))²`
    BEta,
}

impl Form {
    pub fn kind(self) -> ProductKind {
        match self {
            Form::ATheta | Form::AThetaAlt | Form::AEta => ProductKind::A,
            Form::BTheta | Form::BEta => ProductKind::B,
        }
    }

    /// All forms of `kind`, primary first.
    pub fn all(kind: ProductKind) -> &'static [Form] {
        match kind {
            ProductKind::A => &[Form::ATheta, Form::AThetaAlt, Form::AEta],
            ProductKind::B => &[Form::BTheta, Form::BEta],
        }
    }

    fn eval_at(self, nm: &Nome) -> Result<RealValue, BignumError> {
        let n = nm.n;
        let q = &nm.q;
        let bits = q.bits();
        let qn = nm.power(&n);
        let q2n = qn.square();
        let q2 = q.square();
        let blk = eval_block_at;
        let nv = RealValue::from_ratio(&n, bits);
        let theta = |num: RealValue, den: RealValue| -> RealValue {
            nv.mul(&nm.power(&((n - 1) / 4))).mul(&num.square()).div(&den.square())
        };
        let eta = |num: RealValue, den: RealValue| -> RealValue {
            nv.mul(&nm.power(&((n - 1) / 8)).mul(&num).div(&den).square())
        };
        Ok(match self {
            Form::ATheta => theta(
                blk(BlockKind::PsiPlus, &qn)?.mul(&blk(BlockKind::PhiMinus, &q2n)?),
                blk(BlockKind::PsiPlus, q)?.mul(&blk(BlockKind::PhiMinus, &q2)?),
            ),
            Form::AThetaAlt => theta(
                blk(BlockKind::PsiMinus, &qn)?.mul(&blk(BlockKind::PhiPlus, &qn)?),
                blk(BlockKind::PsiMinus, q)?.mul(&blk(BlockKind::PhiPlus, q)?),
            ),
            Form::AEta => eta(
                blk(BlockKind::FPlus, &qn)?.mul(&blk(BlockKind::FMinus, &q2n)?),
                blk(BlockKind::FPlus, q)?.mul(&blk(BlockKind::FMinus, &q2)?),
            ),
            Form::BTheta => theta(
                blk(BlockKind::PsiPlus, &qn)?.mul(&blk(BlockKind::PhiMinus, &qn)?),
                blk(BlockKind::PsiPlus, q)?.mul(&blk(BlockKind::PhiMinus, q)?),
            ),
            Form::BEta => eta(
                blk(BlockKind::FMinus, &qn)?.mul(&blk(BlockKind::FMinus, &q2n)?),
                blk(BlockKind::FMinus, q)?.mul(&blk(BlockKind::FMinus, &q2)?),
            ),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ProductError {
    #[error(transparent)]
    Numeric(#[from] BignumError),
    #[error("{kind}_{{{m},{n}}}: forms {first:?} and {second:?} differ by 10^{difference_log10:.1}, beyond their error bounds")]
    FormDisagreement { kind: ProductKind, m: Rational64, n: Rational64, first: Form, second: Form, difference_log10: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductValue {
    #[serde(serialize_with = "serialize_ratio")]
    pub m: Rational64,
    #[serde(serialize_with = "serialize_ratio")]
    pub n: Rational64,
    pub kind: ProductKind,
    pub value: RealValue,
    pub forms_checked: Vec<Form>,
}

/// Evaluates one form to the target precision.
pub fn eval_form(form: Form, m: Rational64, n: Rational64, prec: &PrecisionSpec) -> Result<RealValue, BignumError> {
    bignum::adaptive(prec, |bits| form.eval_at(&Nome::at_bits(m, n, bits)?))
}

fn evaluate(kind: ProductKind, m: Rational64, n: Rational64, prec: &PrecisionSpec) -> Result<ProductValue, ProductError> {
    let forms = Form::all(kind);
    let mut nome = None;
    let value = bignum::adaptive(prec, |bits| {
        let nm = Nome::at_bits(m, n, bits)?;
        let v = forms[0].eval_at(&nm)?;
        nome = Some(nm);
        Ok(v)
    })?;
    let nm = nome.expect("adaptive evaluated at least once");
    for &other in &forms[1..] {
        let w = other.eval_at(&nm)?;
        if !within_bounds(&value, &w) {
            let difference_log10 = value.sub(&w).log10_abs().unwrap_or(f64::NEG_INFINITY);
            return Err(ProductError::FormDisagreement { kind, m, n, first: forms[0], second: other, difference_log10 });
        }
    }
    Ok(ProductValue { m, n, kind, value, forms_checked: forms.to_vec() })
}

/// True when the two error intervals overlap.
fn within_bounds(a: &RealValue, b: &RealValue) -> bool {
    !a.sub(b).abs().certainly_positive()
}

pub fn a_numeric(m: Rational64, n: Rational64, prec: &PrecisionSpec) -> Result<ProductValue, ProductError> {
    evaluate(ProductKind::A, m, n, prec)
}

pub fn b_numeric(m: Rational64, n: Rational64, prec: &PrecisionSpec) -> Result<ProductValue, ProductError> {
    evaluate(ProductKind::B, m, n, prec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bignum::digits_agreement;
    use crate::radicals::parse_radical;
    use proptest::prelude::*;

    fn r(n: i64) -> Rational64 {
        Rational64::from_integer(n)
    }

    fn closed(text: &str, digits: u32) -> RealValue {
        parse_radical(text).unwrap().eval(&PrecisionSpec::new(digits)).unwrap()
    }

    #[test]
    fn n_equal_one_collapses() {
        let prec = PrecisionSpec::new(30);
        for m in [r(1), r(5), Rational64::new(2, 7)] {
            let a = a_numeric(m, r(1), &prec).unwrap();
            let b = b_numeric(m, r(1), &prec).unwrap();
            let one = bignum::one(a.value.bits());
            assert!(digits_agreement(&a.value, &one, 40.0) >= 30.0);
            assert!(digits_agreement(&b.value, &one, 40.0) >= 30.0);
            assert_eq!(a.forms_checked.len(), 3);
            assert_eq!(b.forms_checked.len(), 2);
        }
    }

    #[test]
    fn a23_matches_closed_form() {
        let prec = PrecisionSpec::new(80);
        let a = a_numeric(r(2), r(3), &prec).unwrap();
        let c = closed("(sqrt(2)-1)*(sqrt(3)+sqrt(2))^(1/2)", 80);
        assert!(digits_agreement(&a.value, &c, 100.0) >= 80.0);
    }

    #[test]
    fn a10_b40_product_and_ratio() {
        let prec = PrecisionSpec::new(50);
        let a = a_numeric(r(10), r(3), &prec).unwrap().value;
        let b = b_numeric(r(40), r(3), &prec).unwrap().value;
        let prod = closed("(sqrt(2)-1)^4*((sqrt(5)-1)/2)^6", 50);
        let ratio = closed("2*sqrt(5)+3*sqrt(2)+sqrt(15)+2*sqrt(6)", 50);
        assert!(digits_agreement(&a.mul(&b), &prod, 70.0) >= 50.0);
        assert!(digits_agreement(&a.div(&b), &ratio, 70.0) >= 50.0);
    }

    #[test]
    fn mpmath_reference_values() {
        // a_{3,7} and b_{3,5} from the product definitions in mpmath at 50 digits
        let prec = PrecisionSpec::new(35);
        let a = a_numeric(r(3), r(7), &prec).unwrap().value;
        let b = b_numeric(r(3), r(5), &prec).unwrap().value;
        let a_ref = RealValue::parse_decimal("0.26794919243112270647255365849412763305719474618962", 200).unwrap();
        let b_ref = RealValue::parse_decimal(B35_REF, 200).unwrap();
        assert!(digits_agreement(&a, &a_ref, 40.0) >= 35.0, "{}", a.to_decimal_string(40));
        assert!(digits_agreement(&b, &b_ref, 40.0) >= 35.0, "{}", b.to_decimal_string(40));
    }

    const B35_REF: &str = "0.54449887468057611034964308940312516172858075156437";

    #[test]
    fn rejects_nonpositive_index() {
        assert!(a_numeric(r(0), r(3), &PrecisionSpec::new(20)).is_err());
        assert!(b_numeric(r(2), r(-3), &PrecisionSpec::new(20)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn positive_and_forms_agree(mn in 1i64..40, md in 1i64..6, n in 1i64..8) {
            let m = Rational64::new(mn, md);
            let prec = PrecisionSpec::new(30);
            let a = a_numeric(m, r(n), &prec).unwrap();
            let b = b_numeric(m, r(n), &prec).unwrap();
            prop_assert!(a.value.certainly_positive());
            prop_assert!(b.value.certainly_positive());
        }
    }
}

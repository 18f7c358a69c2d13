//! Cross-module properties: precision scaling, error-bound honesty,
//! verifier agreement and pipeline closure.

use num_rational::Rational64;
use proptest::prelude::*;

use thetaprod::bignum::{digits_agreement, eval_block, PrecisionSpec, RealValue};
use thetaprod::blocks::BlockKind;
use thetaprod::etaq::{verify_numeric, verify_series, Catalogue, ProbePoint, PROBES};
use thetaprod::exactseries::eval_block_series;
use thetaprod::invariants::{g_numeric, solve_companion, Companion, Known};
use thetaprod::products::a_numeric;
use thetaprod::radicals::{verify_corollary, Registry};
use thetaprod::theorems::{reproduce_corollary, reproducible_ids};

fn q_value(num: i64, den: i64, digits: u32) -> RealValue {
    ProbePoint::Fixed { num, den }.value(PrecisionSpec::new(digits).working_bits() + 64).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn doubling_precision_keeps_correct_digits(k in 0usize..8, num in 1i64..30, digits in 20u32..60) {
        let kind = BlockKind::ALL[k];
        let lo = eval_block(kind, 1, &q_value(num, 100, 2 * digits), &PrecisionSpec::new(digits)).unwrap();
        let hi = eval_block(kind, 1, &q_value(num, 100, 2 * digits), &PrecisionSpec::new(2 * digits)).unwrap();
        prop_assert!(digits_agreement(&lo, &hi, f64::from(2 * digits)) >= f64::from(digits));
    }

    #[test]
    fn claimed_error_bounds_hold(mn in 1i64..60, md in 1i64..5, n in 1i64..14) {
        let m = Rational64::new(mn, md);
        let n = Rational64::from_integer(n);
        let lo = a_numeric(m, n, &PrecisionSpec::new(25)).unwrap().value;
        let hi = a_numeric(m, n, &PrecisionSpec::new(60)).unwrap().value;
        // the intervals must overlap
        prop_assert!(!lo.sub(&hi).abs().certainly_positive());
    }

    #[test]
    fn series_and_numeric_blocks_agree(k in 0usize..8, num in 1i64..25) {
        let kind = BlockKind::ALL[k];
        let q = q_value(num, 100, 40);
        let numeric = eval_block(kind, 1, &q, &PrecisionSpec::new(30)).unwrap();
        let series = eval_block_series(kind, &q, 24 * 80).unwrap();
        prop_assert!(digits_agreement(&numeric, &series, 40.0) >= 30.0);
    }

    #[test]
    fn triple3_closes_on_definitional_values(num in 1i64..40, den in 1i64..4) {
        let n = Rational64::new(num, den);
        let prec = PrecisionSpec::new(40);
        let known = g_numeric(n * 3, &PrecisionSpec::new(50)).unwrap();
        let sol = solve_companion(Companion::Triple3, &Known::Value(known), n, &prec).unwrap();
        let direct = g_numeric(n / 3, &prec).unwrap();
        prop_assert!(digits_agreement(&sol.value, &direct, 50.0) >= 40.0);
    }

    #[test]
    fn scaling_a_relation_keeps_its_verdicts(idx in 0usize..20, k in 2i64..50) {
        let cat = Catalogue::builtin();
        let rec = &cat.records()[idx];
        let text = rec.to_string();
        let rel = rec.relation_text();
        let (lhs, rhs) = rel.split_once(" = ").unwrap();
        let scaled = text.replace(&rel, &format!("{k}*({lhs}) = {k}*({rhs})"));
        prop_assert_ne!(&scaled, &text);
        let scaled = Catalogue::parse(&scaled).unwrap();
        let srec = &scaled.records()[0];
        let prec = PrecisionSpec::new(40);
        let q = q_value(1, 20, 60);
        prop_assert_eq!(
            verify_numeric(rec, &q, &prec).unwrap().passed(),
            verify_numeric(srec, &q, &prec).unwrap().passed()
        );
        prop_assert_eq!(verify_series(rec, 24 * 6).unwrap().passed(), verify_series(srec, 24 * 6).unwrap().passed());
    }
}

#[test]
fn series_pass_implies_numeric_pass() {
    let prec = PrecisionSpec::new(100);
    for rec in Catalogue::builtin().records() {
        if !verify_series(rec, 24 * 30).unwrap().passed() {
            continue;
        }
        for &(num, den) in &PROBES {
            let q = q_value(num, den, 130);
            assert!(verify_numeric(rec, &q, &prec).unwrap().passed(), "{} at {num}/{den}", rec.id);
        }
    }
}

#[test]
fn raising_precision_never_flips_a_pass() {
    let reg = Registry::builtin();
    for rec in reg.records() {
        let verdicts: Vec<bool> =
            [30, 60, 90].iter().map(|&d| verify_corollary(rec, &PrecisionSpec::new(d)).unwrap().verdict.passed()).collect();
        assert!(verdicts.windows(2).all(|w| !w[0] || w[1]), "{}: {verdicts:?}", rec.id);
    }
}

#[test]
fn every_pipeline_closes_and_matches_direct_evaluation() {
    let reg = Registry::builtin();
    let prec = PrecisionSpec::new(60);
    for id in reproducible_ids(&reg) {
        let rep = reproduce_corollary(&id, &reg, &prec).unwrap();
        assert!(rep.residuals_ok(), "{id}: back-substitution residual");
        // the pipeline never depends on the printed closed form
        assert!(rep.pipeline_vs_direct.unwrap() >= 60.0, "{id}: {:?}", rep.pipeline_vs_direct);
    }
}

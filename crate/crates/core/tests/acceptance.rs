//! Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned here.

use std::time::{Duration, Instant};

use num_rational::Rational64;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

use thetaprod::bignum::{digits_agreement, PrecisionSpec, RealValue};
use thetaprod::blocks::Sign;
use thetaprod::etaq::{Catalogue, PROBES};
use thetaprod::exactseries::{compare, euler_product, series_f, series_phi, series_psi, PowerSeries, LATTICE};
use thetaprod::harness::{run_identities, run_multiplier13, IdentityMode, Probes, RunReport, Settings};
use thetaprod::invariants::{registry_lookup, solve_companion, Companion, InvariantKind, Known};
use thetaprod::products::{a_numeric, b_numeric, eval_form, Form, ProductKind};
use thetaprod::radicals::{parse_radical, verify_corollary, Registry};
use thetaprod::theorems::reproduce_corollary;

const IDENTITY_DIGITS: u32 = 100;
const IDENTITY_RESIDUAL_LOG10: f64 = -85.0;
const IDENTITY_BUDGET: Duration = Duration::from_secs(120);
const SERIES_ORDER: i64 = 24 * 30;
const SERIES_BUDGET: Duration = Duration::from_secs(300);
const MULTIPLIER_DIGITS: u32 = 80;
const MULTIPLIER_RESIDUAL_LOG10: f64 = -65.0;
const MATCH_DIGITS: f64 = 60.0;
const PIPELINE_DIGITS: u32 = 100;
const BACKSUB_RESIDUAL_LOG10: f64 = -85.0;
const RING_ORDER: i64 = 24 * 50;
const GRID_PAIRS: usize = 50;
const GRID_DIGITS: u32 = 50;

const COROLLARIES: [&str; 21] = [
    "a_2_3", "a_4_3", "a_8_3", "a_10_3", "a_6_3", "a_14_3", "a_26_3", "a_34_3", "a_2_5", "a_4_5", "a_6_5", "a_8_5",
    "a_14_5", "a_26_5", "a_38_5", "a_2_7", "a_4_7", "a_6_7", "a_10_7", "a_6_13", "a_10_13",
];

/// Printed values that disagree with the definition, with the corrected
/// closed form (one exponent and one radical restored).
const PRINTED_MISPRINTS: [(&str, i64, &str); 2] = [
    ("a_26_5", 26, "(sqrt(2)+1)^2*(sqrt(10)+3)*(sqrt(65)-8)^2*((sqrt(13)-3)/2)^3"),
    ("a_38_5", 38, "(sqrt(2)-1)^8*(2*sqrt(5)+sqrt(19))*(sqrt(19)+3*sqrt(2))*((sqrt(5)-1)/2)^9"),
];

fn line(n: u32, name: &str, ok: bool, detail: impl AsRef<str>) -> bool {
    println!("{} #{n} {name}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    ok
}

fn r(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

fn worst_residual(rep: &RunReport) -> f64 {
    rep.checks.iter().filter_map(|c| c.residual_log10).fold(f64::NEG_INFINITY, f64::max)
}

fn identity_settings(mode: IdentityMode) -> Settings {
    Settings {
        prec: PrecisionSpec::new(IDENTITY_DIGITS),
        series_order: SERIES_ORDER,
        probes: Probes { fixed: PROBES.to_vec(), natural_nome: false },
        mode,
    }
}

#[test]
fn c1_identities_numeric() {
    let cat = Catalogue::builtin();
    let t = Instant::now();
    let rep = run_identities(&cat, &identity_settings(IdentityMode::Numeric), "all").unwrap();
    let elapsed = t.elapsed();
    let failing: Vec<&str> = rep.checks.iter().filter(|c| !c.passed()).map(|c| c.id.as_str()).collect();
    let worst = worst_residual(&rep);
    let ok = cat.len() == 20
        && rep.checks.len() == 20 * PROBES.len()
        && failing.is_empty()
        && worst <= IDENTITY_RESIDUAL_LOG10
        && elapsed < IDENTITY_BUDGET;
    assert!(line(
        1,
        "identities numeric",
        ok,
        format!("{} checks, worst residual 1e{worst:.1}, {:.2}s, failing {failing:?}", rep.checks.len(), elapsed.as_secs_f64())
    ));
}

#[test]
fn c2_identities_series() {
    let cat = Catalogue::builtin();
    let t = Instant::now();
    let rep = run_identities(&cat, &identity_settings(IdentityMode::Series), "all").unwrap();
    let elapsed = t.elapsed();
    let failing: Vec<&str> = rep.checks.iter().filter(|c| !c.passed()).map(|c| c.id.as_str()).collect();
    let ok = rep.checks.len() == 20 && failing.is_empty() && elapsed < SERIES_BUDGET;
    assert!(line(
        2,
        "identities exact",
        ok,
        format!("{} series checks to lattice order {SERIES_ORDER}, {:.2}s, failing {failing:?}", rep.checks.len(), elapsed.as_secs_f64())
    ));
}

#[test]
fn c3_multiplier13() {
    let settings = Settings { prec: PrecisionSpec::new(MULTIPLIER_DIGITS), ..Settings::default() };
    let rep = run_multiplier13(&settings);
    let worst = worst_residual(&rep);
    let ok = rep.checks.len() == 2 && rep.success() && worst <= MULTIPLIER_RESIDUAL_LOG10;
    assert!(line(3, "degree-13 multiplier", ok, format!("q in {{0.05, nome(1,13)}}, worst residual 1e{worst:.1}")));
}

#[test]
fn c4_closed_form_corollaries() {
    let reg = Registry::builtin();
    let prec = PrecisionSpec::new(MATCH_DIGITS as u32);
    let mut failing = Vec::new();
    for id in COROLLARIES {
        let chk = verify_corollary(reg.get(id).unwrap_or_else(|| panic!("registry lacks {id}")), &prec).unwrap();
        if chk.digits < MATCH_DIGITS {
            failing.push((id, chk.digits));
        }
    }
    // corrected forms of the known misprints, against the definition
    let corrected: Vec<(&str, f64)> = PRINTED_MISPRINTS
        .iter()
        .map(|&(id, m, text)| {
            let closed = parse_radical(text).unwrap().eval(&prec).unwrap();
            let direct = a_numeric(r(m), r(5), &prec).unwrap().value;
            (id, digits_agreement(&closed, &direct, f64::from(prec.working_digits())))
        })
        .collect();
    let detail = format!(
        "{}/{} at >= {MATCH_DIGITS} digits; below: {failing:?}; corrected forms: {corrected:?}",
        COROLLARIES.len() - failing.len(),
        COROLLARIES.len()
    );
    let passed = line(4, "closed-form corollaries", failing.is_empty(), detail);
    if !passed {
        // Only misprints whose corrected form verifies are tolerated; the line above stays FAIL.
        let known: Vec<&str> = PRINTED_MISPRINTS.iter().map(|p| p.0).collect();
        let unexplained: Vec<_> = failing.iter().filter(|(id, _)| !known.contains(id)).collect();
        assert!(unexplained.is_empty(), "unexplained corollary failures: {unexplained:?}");
        assert!(corrected.iter().all(|(_, d)| *d >= MATCH_DIGITS), "corrected forms do not verify: {corrected:?}");
    }
}

#[test]
fn c5_invariant_registry() {
    let reg = Registry::builtin();
    let prec = PrecisionSpec::new(MATCH_DIGITS as u32);
    let cap = f64::from(prec.working_digits());
    let mut results: Vec<(String, f64)> = Vec::new();
    for n in [30, 78] {
        let v = registry_lookup(&reg, InvariantKind::SmallG, r(n), &prec).unwrap().expect("printed invariant");
        let closed = v.closed_form.unwrap().eval(&prec).unwrap();
        results.push((format!("g_{n}"), digits_agreement(&closed, &v.numeric, cap)));
    }
    for id in ["g_6*g_2/3", "g_12*g_4/3"] {
        results.push((id.to_string(), verify_corollary(reg.get(id).unwrap(), &prec).unwrap().digits));
    }
    let eval = |id: &str| reg.get(id).unwrap().expr.eval(&PrecisionSpec::new(MATCH_DIGITS as u32 + 10)).unwrap();
    for (relation, n, known, unknown) in
        [(Companion::Triple3, r(10), "g_30", "g_10/3"), (Companion::Deg13, r(6), "g_78", "g_6/13")]
    {
        let sol = solve_companion(relation, &Known::Value(eval(known)), n, &prec).unwrap();
        results.push((format!("{relation} -> {unknown}"), digits_agreement(&sol.value, &eval(unknown), cap)));
    }
    let ok = results.iter().all(|(_, d)| *d >= MATCH_DIGITS);
    let detail: Vec<String> = results.iter().map(|(id, d)| format!("{id} {d:.1}")).collect();
    assert!(line(5, "invariant registry", ok, detail.join(", ")));
}

#[test]
fn c6_pipeline_reproduction() {
    let reg = Registry::builtin();
    let prec = PrecisionSpec::new(PIPELINE_DIGITS);
    let mut detail = Vec::new();
    let mut ok = true;
    for id in ["a_2_3", "a_4_3", "a_10_3", "a_6_13"] {
        let rep = reproduce_corollary(id, &reg, &prec).unwrap();
        let three = rep.three_way_digits().unwrap_or(0.0);
        let pipe = rep.pipeline.as_ref().expect("pipeline ran");
        let resid = [&pipe.ratio_residual, &pipe.product_residual]
            .iter()
            .map(|x| x.log10_abs().unwrap_or(f64::NEG_INFINITY))
            .fold(f64::NEG_INFINITY, f64::max);
        ok &= three >= MATCH_DIGITS && resid <= BACKSUB_RESIDUAL_LOG10 && !rep.lambda.as_ref().unwrap().construction.numeric_only;
        detail.push(format!("{id} {three:.1} digits, residual 1e{resid:.1}"));
    }
    assert!(line(6, "pipeline reproduction", ok, detail.join(", ")));
}

#[test]
fn c7_radical_simplification() {
    let reg = Registry::builtin();
    let rec = reg.records().iter().find(|r| r.id.starts_with("radical")).expect("radical identity in registry");
    let chk = verify_corollary(rec, &PrecisionSpec::new(MATCH_DIGITS as u32)).unwrap();
    assert!(line(7, "radical simplification", chk.digits >= MATCH_DIGITS, format!("{} to {:.1} digits", rec.target, chk.digits)));
}

fn ring_laws() -> Result<(), String> {
    let o = RING_ORDER;
    let a = series_f(1, Sign::Minus, o).unwrap();
    let b = series_phi(Sign::Plus, o).unwrap();
    let c = series_psi(Sign::Minus, o).unwrap().shift(3);
    let same = |x: &PowerSeries, y: &PowerSeries, what: &str| {
        if compare(x, y).passed() {
            Ok(())
        } else {
            Err(format!("{what} fails"))
        }
    };
    same(&a.mul(&b), &b.mul(&a), "commutativity")?;
    same(&a.mul(&b).mul(&c), &a.mul(&b.mul(&c)), "associativity")?;
    same(&a.mul(&b.add(&c)), &a.mul(&b).add(&a.mul(&c)), "distributivity")?;
    same(&a.add(&b).sub(&b), &a, "additive inverse")?;
    same(&a.mul(&a.invert().unwrap()), &PowerSeries::one(o), "multiplicative inverse")?;
    same(&b.pow_int(-3).unwrap().mul(&b.pow_int(3).unwrap()), &PowerSeries::one(o), "integer powers")?;
    same(&series_f(1, Sign::Minus, o).unwrap(), &euler_product(o).unwrap(), "pentagonal sum vs product")?;
    Ok(())
}

/// 50 reproducible (m, n) pairs drawn from a fixed-seed generator.
fn grid() -> Vec<(Rational64, Rational64)> {
    let mut runner = TestRunner::deterministic();
    let strategy = (1i64..80, 1i64..7, 1i64..14).prop_map(|(mn, md, n)| (Rational64::new(mn, md), r(n)));
    (0..GRID_PAIRS).map(|_| strategy.new_tree(&mut runner).unwrap().current()).collect()
}

fn form_equivalence() -> Result<f64, String> {
    let prec = PrecisionSpec::new(GRID_DIGITS);
    let cap = f64::from(prec.working_digits());
    let mut worst = f64::INFINITY;
    for (m, n) in grid() {
        for kind in [ProductKind::A, ProductKind::B] {
            let forms = Form::all(kind);
            let first = eval_form(forms[0], m, n, &prec).map_err(|e| e.to_string())?;
            for &f in &forms[1..] {
                let d = digits_agreement(&first, &eval_form(f, m, n, &prec).map_err(|e| e.to_string())?, cap);
                worst = worst.min(d);
                if d < f64::from(GRID_DIGITS) {
                    return Err(format!("{kind}_{{{m},{n}}}: {f:?} agrees to {d:.1} digits"));
                }
            }
        }
    }
    Ok(worst)
}

/// Accuracy against a high-precision reference never drops as the target rises.
fn precision_monotone() -> Result<(), String> {
    let probes: [(ProductKind, i64, i64); 4] =
        [(ProductKind::A, 2, 3), (ProductKind::A, 10, 3), (ProductKind::B, 4, 7), (ProductKind::A, 6, 13)];
    let eval = |kind, m: i64, n: i64, digits: u32| -> RealValue {
        let prec = PrecisionSpec::new(digits);
        match kind {
            ProductKind::A => a_numeric(r(m), r(n), &prec),
            ProductKind::B => b_numeric(r(m), r(n), &prec),
        }
        .unwrap()
        .value
    };
    for (kind, m, n) in probes {
        let reference = eval(kind, m, n, 200);
        let mut prev = 0.0;
        for digits in [20, 40, 80, 120] {
            let d = digits_agreement(&eval(kind, m, n, digits), &reference, 200.0);
            if d < f64::from(digits) || d < prev {
                return Err(format!("{kind}_{{{m},{n}}} at {digits} digits: {d:.1} correct (previous {prev:.1})"));
            }
            prev = d;
        }
    }
    Ok(())
}

#[test]
fn c8_property_suites() {
    let ring = ring_laws();
    let forms = form_equivalence();
    let mono = precision_monotone();
    let ok = ring.is_ok() && forms.is_ok() && mono.is_ok();
    let detail = format!(
        "ring laws to lattice order {RING_ORDER} (q-order {}): {ring:?}; form grid {GRID_PAIRS} pairs at {GRID_DIGITS} digits: {}; monotonicity: {mono:?}",
        RING_ORDER / LATTICE,
        match &forms {
            Ok(w) => format!("worst {w:.1} digits"),
            Err(e) => e.clone(),
        }
    );
    assert!(line(8, "property suites", ok, detail));
}

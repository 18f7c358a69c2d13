//! Suite orchestration and machine-readable run reports.
//!
//! Every suite expands into independent tasks that run on the rayon pool;
//! results are collected in task order, so reports are stable regardless of
//! completion order.

use std::collections::BTreeMap;
use std::time::Instant;

use num_rational::Rational64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::bignum::{digits_agreement, PrecisionSpec, RealValue, MAX_RETRIES};
use crate::etaq::{
    probe_points, verify_multiplier13, verify_numeric, verify_series, Catalogue, IdentityRecord, ProbePoint, PROBES,
};
use crate::exactseries::{check_entry24, SeriesComparison, LATTICE};
use crate::invariants::{g_numeric, registry_lookup, solve_companion, Companion, InvariantKind, Known};
use crate::radicals::{verify_corollary, Quantity, Registry, Target};
use crate::theorems::{reproduce_corollary, reproducible_ids, LambdaRoute};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_DIGITS: u32 = 100;
pub const DEFAULT_SERIES_ORDER: i64 = 24 * 30;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },
    #[error("invalid probe `{0}` (expected a decimal in (0,1) or `nome`)")]
    InvalidProbe(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityMode {
    Series,
    Numeric,
    Both,
}

impl IdentityMode {
    fn series(self) -> bool {
        self != IdentityMode::Numeric
    }

    fn numeric(self) -> bool {
        self != IdentityMode::Series
    }
}

/// Fixed probe values plus, optionally, each identity's natural nome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Probes {
    pub fixed: Vec<(i64, i64)>,
    pub natural_nome: bool,
}

impl Default for Probes {
    fn default() -> Self {
        Probes { fixed: PROBES.to_vec(), natural_nome: true }
    }
}

impl Probes {
    /// Parses a comma-separated list such as `0.01,0.05,nome`.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut out = Probes { fixed: Vec::new(), natural_nome: false };
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if item == "nome" {
                out.natural_nome = true;
                continue;
            }
            let bad = || HarnessError::InvalidProbe(item.to_string());
            let (int, frac) = item.split_once('.').ok_or_else(bad)?;
            if int != "0" || frac.is_empty() || frac.len() > 15 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let num: i64 = frac.parse().map_err(|_| bad())?;
            if num == 0 {
                return Err(bad());
            }
            let r = Rational64::new(num, 10i64.pow(frac.len() as u32));
            out.fixed.push((*r.numer(), *r.denom()));
        }
        if out.fixed.is_empty() && !out.natural_nome {
            return Err(HarnessError::InvalidProbe(text.to_string()));
        }
        Ok(out)
    }

    fn points(&self, rec: &IdentityRecord) -> Vec<ProbePoint> {
        let mut v: Vec<ProbePoint> = self.fixed.iter().map(|&(num, den)| ProbePoint::Fixed { num, den }).collect();
        if self.natural_nome {
            v.extend(probe_points(rec).into_iter().filter(|p| matches!(p, ProbePoint::NaturalNome { .. })));
        }
        v
    }

    fn labels(&self) -> Vec<String> {
        let mut v: Vec<String> = self.fixed.iter().map(|&(num, den)| ProbePoint::Fixed { num, den }.label()).collect();
        if self.natural_nome {
            v.push("q=nome(1,k)".into());
        }
        v
    }
}

#[derive(Clone, Debug)]
pub struct Settings {
    pub prec: PrecisionSpec,
    pub series_order: i64,
    pub probes: Probes,
    pub mode: IdentityMode,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            prec: PrecisionSpec::new(DEFAULT_DIGITS),
            series_order: DEFAULT_SERIES_ORDER,
            probes: Probes::default(),
            mode: IdentityMode::Both,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PrecisionSettings {
    pub target_digits: u32,
    pub guard_digits: u32,
    pub series_order: i64,
    pub probes: Vec<String>,
}

impl From<&Settings> for PrecisionSettings {
    fn from(s: &Settings) -> Self {
        PrecisionSettings {
            target_digits: s.prec.target_digits,
            guard_digits: s.prec.guard_digits,
            series_order: s.series_order,
            probes: s.probes.labels(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckVerdict {
    Pass,
    Fail,
    /// The check could not be carried out.
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub suite: &'static str,
    pub id: String,
    pub inputs: BTreeMap<String, String>,
    pub verdict: CheckVerdict,
    /// log10 of the normalised residual, for residual-based checks.
    pub residual_log10: Option<f64>,
    /// Agreeing significant digits, for comparison-based checks.
    pub digits: Option<f64>,
    pub wall_ms: f64,
    pub source: String,
    /// Informational checks never affect the exit status.
    pub informational: bool,
    pub note: Option<String>,
}

impl CheckRecord {
    fn new(suite: &'static str, id: impl Into<String>, source: impl Into<String>) -> Self {
        CheckRecord {
            suite,
            id: id.into(),
            inputs: BTreeMap::new(),
            verdict: CheckVerdict::Error,
            residual_log10: None,
            digits: None,
            wall_ms: 0.0,
            source: source.into(),
            informational: false,
            note: None,
        }
    }

    fn input(mut self, k: &str, v: impl ToString) -> Self {
        self.inputs.insert(k.to_string(), v.to_string());
        self
    }

    fn pass_if(mut self, ok: bool) -> Self {
        self.verdict = if ok { CheckVerdict::Pass } else { CheckVerdict::Fail };
        self
    }

    fn error(mut self, e: impl std::fmt::Display) -> Self {
        self.verdict = CheckVerdict::Error;
        self.note = Some(e.to_string());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == CheckVerdict::Pass
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub suite: String,
    pub version: &'static str,
    pub precision: PrecisionSettings,
    pub checks: Vec<CheckRecord>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub informational: usize,
}

impl RunReport {
    /// True iff every non-informational check passed.
    pub fn success(&self) -> bool {
        self.checks.iter().all(|c| c.informational || c.passed())
    }

    pub fn tally(&self) -> Tally {
        let mut t = Tally::default();
        for c in &self.checks {
            if c.informational {
                t.informational += 1;
                continue;
            }
            match c.verdict {
                CheckVerdict::Pass => t.passed += 1,
                CheckVerdict::Fail => t.failed += 1,
                CheckVerdict::Error => t.errors += 1,
            }
        }
        t
    }

    /// One JSON object per check, then a summary object.
    pub fn json_lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                let mut v = serde_json::to_value(c).expect("check serialises");
                let obj = v.as_object_mut().expect("object");
                obj.insert("run_suite".into(), json!(self.suite));
                obj.insert("version".into(), json!(self.version));
                obj.insert("precision".into(), serde_json::to_value(&self.precision).expect("serialises"));
                v.to_string()
            })
            .collect();
        out.push(
            json!({
                "summary": true,
                "run_suite": self.suite,
                "version": self.version,
                "precision": self.precision,
                "tally": self.tally(),
                "success": self.success(),
            })
            .to_string(),
        );
        out
    }

    /// Plain-text table, one line per check.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let verdict = match (c.verdict, c.informational) {
                (_, true) => "INFO",
                (CheckVerdict::Pass, _) => "PASS",
                (CheckVerdict::Fail, _) => "FAIL",
                (CheckVerdict::Error, _) => "ERROR",
            };
            let metric = match (c.residual_log10, c.digits) {
                (Some(r), _) if r.is_finite() => format!("residual 1e{r:.1}"),
                (Some(_), _) => "residual 0".to_string(),
                (None, Some(d)) => format!("{d:.1} digits"),
                (None, None) => String::new(),
            };
            s.push_str(&format!("{verdict:5} {:12} {:40} {metric:18} [{}]", c.suite, c.id, c.source));
            if let Some(n) = &c.note {
                s.push_str(&format!("  {n}"));
            }
            s.push('\n');
        }
        let t = self.tally();
        s.push_str(&format!(
            "{}: {} passed, {} failed, {} errors, {} informational\n",
            self.suite, t.passed, t.failed, t.errors, t.informational
        ));
        s
    }
}

type Task<'a> = Box<dyn Fn() -> Vec<CheckRecord> + Send + Sync + 'a>;

fn timed(f: impl FnOnce() -> CheckRecord) -> CheckRecord {
    let t = Instant::now();
    let mut c = f();
    c.wall_ms = t.elapsed().as_secs_f64() * 1e3;
    c
}

fn run_tasks(tasks: Vec<Task<'_>>) -> Vec<CheckRecord> {
    tasks.par_iter().map(|t| t()).collect::<Vec<_>>().into_iter().flatten().collect()
}

fn select_ids(all: Vec<String>, requested: &str, kind: &'static str) -> Result<Vec<String>, HarnessError> {
    if requested == "all" {
        return Ok(all);
    }
    if all.iter().any(|i| i == requested) {
        Ok(vec![requested.to_string()])
    } else {
        Err(HarnessError::UnknownId { kind, id: requested.to_string() })
    }
}

// ---------------------------------------------------------------------------
// suites
// ---------------------------------------------------------------------------

fn identity_checks(rec: &IdentityRecord, settings: &Settings) -> Vec<CheckRecord> {
    let prec = &settings.prec;
    let mut out = Vec::new();
    if settings.mode.numeric() {
        let bits = prec.widened(MAX_RETRIES - 1).working_bits();
        for probe in settings.probes.points(rec) {
            out.push(timed(|| {
                let c = CheckRecord::new("identities", format!("{}@{}", rec.id, probe.label()), &rec.source)
                    .input("q", probe.label())
                    .input("digits", prec.target_digits);
                let q = match probe.value(bits) {
                    Ok(q) => q,
                    Err(e) => return c.error(e),
                };
                match verify_numeric(rec, &q, prec) {
                    Ok(r) => {
                        let mut c = c.pass_if(r.passed());
                        c.residual_log10 = Some(r.magnitude_log10());
                        c
                    }
                    Err(e) => c.error(e),
                }
            }));
        }
    }
    if settings.mode.series() {
        out.push(timed(|| {
            let c = CheckRecord::new("identities", format!("{}@series", rec.id), &rec.source)
                .input("order", settings.series_order);
            match verify_series(rec, settings.series_order) {
                Ok(r) => {
                    let mut c = c.pass_if(r.passed());
                    if let Some(f) = &r.first_failure {
                        c.note = Some(format!("first nonzero coefficient {} at q^({}/{LATTICE})", f.coefficient, f.exponent));
                    } else {
                        c.note = Some(format!("zero through q^({}/{LATTICE})", r.checked_through()));
                    }
                    c
                }
                Err(e) => c.error(e),
            }
        }));
    }
    // A relation that fails both verifiers is most likely mistranscribed.
    let series_failed = out.iter().any(|c| c.id.ends_with("@series") && c.verdict == CheckVerdict::Fail);
    let numeric: Vec<&CheckRecord> = out.iter().filter(|c| !c.id.ends_with("@series")).collect();
    let numeric_failed = !numeric.is_empty() && numeric.iter().all(|c| c.verdict == CheckVerdict::Fail);
    if series_failed && numeric_failed {
        for c in out.iter_mut() {
            let prev = c.note.take().map(|n| format!("; {n}")).unwrap_or_default();
            c.note = Some(format!("both verifiers fail: suspected transcription discrepancy in the relation{prev}"));
        }
    }
    out
}

pub fn run_identities(catalogue: &Catalogue, settings: &Settings, ids: &str) -> Result<RunReport, HarnessError> {
    let all = catalogue.records().iter().map(|r| r.id.clone()).collect();
    let selected = select_ids(all, ids, "identity")?;
    let tasks: Vec<Task> = selected
        .iter()
        .map(|id| {
            let rec = catalogue.get(id).expect("selected from catalogue");
            Box::new(move || identity_checks(rec, settings)) as Task
        })
        .collect();
    Ok(report("identities", settings, run_tasks(tasks)))
}

fn corollary_check(rec: &crate::radicals::CorollaryRecord, prec: &PrecisionSpec) -> CheckRecord {
    timed(|| {
        let c = CheckRecord::new("corollaries", &rec.id, &rec.source)
            .input("closed_form", &rec.expr)
            .input("digits", prec.target_digits);
        match verify_corollary(rec, prec) {
            Ok(chk) => {
                let mut c = c.pass_if(chk.verdict.passed());
                c.digits = Some(chk.digits);
                c
            }
            Err(e) => c.error(e),
        }
    })
}

pub fn run_corollaries(registry: &Registry, settings: &Settings, ids: &str) -> Result<RunReport, HarnessError> {
    let all = registry.records().iter().map(|r| r.id.clone()).collect();
    let selected = select_ids(all, ids, "registry")?;
    let tasks: Vec<Task> = selected
        .iter()
        .map(|id| {
            let rec = registry.get(id).expect("selected from registry");
            Box::new(move || vec![corollary_check(rec, &settings.prec)]) as Task
        })
        .collect();
    Ok(report("corollaries", settings, run_tasks(tasks)))
}

fn reproduce_check(id: &str, registry: &Registry, prec: &PrecisionSpec) -> CheckRecord {
    timed(|| {
        let source = registry.get(id).map(|r| r.source.clone()).unwrap_or_default();
        let c = CheckRecord::new("reproduce", id, source).input("digits", prec.target_digits);
        let rep = match reproduce_corollary(id, registry, prec) {
            Ok(r) => r,
            Err(e) => return c.error(e),
        };
        let mut c = c.pass_if(rep.passed());
        c.digits = rep.three_way_digits();
        c.residual_log10 = rep.pipeline.as_ref().map(|p| {
            [&p.ratio_residual, &p.product_residual]
                .iter()
                .map(|r| r.log10_abs().unwrap_or(f64::NEG_INFINITY))
                .fold(f64::NEG_INFINITY, f64::max)
        });
        if let Some(l) = &rep.lambda {
            c = c.input("lambda_route", route_label(l.construction.route));
            let mut notes = vec![if l.construction.numeric_only {
                "lambda numeric-only".to_string()
            } else {
                format!("lambda from {}", l.construction.inputs.join("; "))
            }];
            if let (Some(pc), Some(pd), Some(cd)) = (rep.pipeline_vs_closed, rep.pipeline_vs_direct, rep.closed_vs_direct) {
                notes.push(format!("pipeline~closed {pc:.1}, pipeline~direct {pd:.1}, closed~direct {cd:.1} digits"));
            }
            c.note = Some(notes.join("; "));
        }
        if !rep.missing.is_empty() {
            let prev = c.note.take().map(|n| format!("{n}; ")).unwrap_or_default();
            c.note = Some(format!("{prev}missing: {}", rep.missing.join("; ")));
        }
        c
    })
}

fn route_label(route: LambdaRoute) -> String {
    match route {
        LambdaRoute::RegistryCombination => "registry_combination".into(),
        LambdaRoute::Companion(c) => format!("companion:{c}"),
        LambdaRoute::RegistrySingles => "registry_singles".into(),
        LambdaRoute::Numeric => "numeric".into(),
    }
}

pub fn run_reproduce(registry: &Registry, settings: &Settings, ids: &str) -> Result<RunReport, HarnessError> {
    let selected = select_ids(reproducible_ids(registry), ids, "reproducible")?;
    let tasks: Vec<Task> = selected
        .into_iter()
        .map(|id| Box::new(move || vec![reproduce_check(&id, registry, &settings.prec)]) as Task)
        .collect();
    Ok(report("reproduce", settings, run_tasks(tasks)))
}

/// A companion-relation check: solve from a printed value and compare with
/// the printed (or, failing that, definitional) unknown.
struct CompanionCase {
    relation: Companion,
    n: (i64, i64),
    /// Registry id of the known side, `None` for the reciprocal case.
    known: Option<&'static str>,
    /// Registry id of the expected unknown, `None` to compare definitionally.
    expected: Option<&'static str>,
}

const COMPANION_CASES: [CompanionCase; 4] = [
    CompanionCase { relation: Companion::Triple3, n: (10, 1), known: Some("g_30"), expected: Some("g_10/3") },
    CompanionCase { relation: Companion::Deg13, n: (6, 1), known: Some("g_78"), expected: Some("g_6/13") },
    CompanionCase { relation: Companion::Quad4_36, n: (1, 3), known: None, expected: Some("g_12*g_4/3") },
    CompanionCase { relation: Companion::Quad4_36, n: (2, 3), known: Some("g_6*g_2/3"), expected: None },
];

fn companion_check(case: &CompanionCase, registry: &Registry, prec: &PrecisionSpec) -> CheckRecord {
    timed(|| {
        let n = Rational64::new(case.n.0, case.n.1);
        let source = case.expected.or(case.known).and_then(|id| registry.get(id)).map(|r| r.source.clone());
        let c = CheckRecord::new("invariants", format!("{}@n={n}", case.relation), source.unwrap_or_default())
            .input("known", case.known.unwrap_or("reciprocal of unknown"))
            .input("digits", prec.target_digits);
        let run = || -> Result<(RealValue, RealValue), String> {
            let known = match case.known {
                Some(id) => {
                    let rec = registry.get(id).ok_or_else(|| format!("registry has no `{id}`"))?;
                    Known::Value(rec.expr.eval(&prec.widened(1)).map_err(|e| e.to_string())?)
                }
                None => Known::ReciprocalOfUnknown,
            };
            let sol = solve_companion(case.relation, &known, n, prec).map_err(|e| e.to_string())?;
            let expected = match case.expected {
                Some(id) => registry.get(id).ok_or_else(|| format!("registry has no `{id}`"))?.expr.eval(prec).map_err(|e| e.to_string())?,
                None => {
                    let mut acc = crate::bignum::one(prec.working_bits());
                    for idx in case.relation.unknown_indices(n) {
                        acc = acc.mul(&g_numeric(idx, prec).map_err(|e| e.to_string())?);
                    }
                    acc
                }
            };
            Ok((sol.value, expected))
        };
        match run() {
            Ok((got, want)) => {
                let d = digits_agreement(&got, &want, f64::from(prec.working_digits()));
                let mut c = c.input("expected", case.expected.unwrap_or("definitional")).pass_if(d >= f64::from(prec.target_digits));
                c.digits = Some(d);
                c
            }
            Err(e) => c.error(e),
        }
    })
}

fn lookup_check(kind: InvariantKind, n: Rational64, registry: &Registry, prec: &PrecisionSpec) -> CheckRecord {
    timed(|| {
        let id = kind.quantity(n).id();
        let source = registry.single(&kind.quantity(n)).map(|r| r.source.clone()).unwrap_or_default();
        let c = CheckRecord::new("invariants", format!("lookup {id}"), source).input("digits", prec.target_digits);
        match registry_lookup(registry, kind, n, prec) {
            Ok(Some(v)) => {
                let closed = v.closed_form.as_ref().and_then(|e| e.eval(prec).ok());
                let mut c = c.pass_if(closed.is_some());
                c.digits = closed.map(|cv| digits_agreement(&cv, &v.numeric, f64::from(prec.working_digits())));
                c
            }
            Ok(None) => {
                let mut c = c.pass_if(true);
                c.informational = true;
                c.note = Some("lookup miss".into());
                c
            }
            Err(e) => c.pass_if(false).error(e),
        }
    })
}

pub fn run_invariants(registry: &Registry, settings: &Settings) -> RunReport {
    let prec = &settings.prec;
    let mut tasks: Vec<Task> = Vec::new();
    for rec in registry.records() {
        let (kind, n) = match rec.target {
            Target::Single(Quantity::SmallG(n)) => (InvariantKind::SmallG, n),
            Target::Single(Quantity::BigG(n)) => (InvariantKind::BigG, n),
            _ => continue,
        };
        tasks.push(Box::new(move || vec![lookup_check(kind, n, registry, prec)]));
    }
    // a deliberate miss: the registry holds no G_n values
    tasks.push(Box::new(move || vec![lookup_check(InvariantKind::BigG, Rational64::from_integer(7), registry, prec)]));
    for case in &COMPANION_CASES {
        tasks.push(Box::new(move || vec![companion_check(case, registry, prec)]));
    }
    report("invariants", settings, run_tasks(tasks))
}

pub fn run_multiplier13(settings: &Settings) -> RunReport {
    let prec = &settings.prec;
    let probes = [ProbePoint::Fixed { num: 1, den: 20 }, ProbePoint::NaturalNome { n: 13 }];
    let tasks: Vec<Task> = probes
        .into_iter()
        .map(|probe| {
            Box::new(move || {
                vec![timed(|| {
                    let c = CheckRecord::new("multiplier13", format!("multiplier13@{}", probe.label()), "degree-13 multiplier equations")
                        .input("q", probe.label())
                        .input("digits", prec.target_digits);
                    let q = match probe.value(prec.widened(MAX_RETRIES - 1).working_bits()) {
                        Ok(q) => q,
                        Err(e) => return c.error(e),
                    };
                    match verify_multiplier13(&q, prec) {
                        Ok(r) => {
                            let mut c = c.pass_if(r.passed());
                            c.residual_log10 = Some(
                                [&r.m_equation, &r.reciprocal_equation, &r.product_check]
                                    .iter()
                                    .map(|x| x.magnitude_log10())
                                    .fold(f64::NEG_INFINITY, f64::max),
                            );
                            c
                        }
                        Err(e) => c.error(e),
                    }
                })]
            }) as Task
        })
        .collect();
    report("multiplier13", settings, run_tasks(tasks))
}

pub fn run_entry24(settings: &Settings) -> RunReport {
    let check = timed(|| {
        let c = CheckRecord::new("entry24", "entry24@series", "eta-quotient product and quotient forms").input("order", settings.series_order);
        match check_entry24(settings.series_order) {
            Ok(r) => {
                let describe = |s: &SeriesComparison| match s {
                    SeriesComparison::Agree { through } => format!("agree through q^({through}/{LATTICE})"),
                    SeriesComparison::Differ { exponent, lhs, rhs } => {
                        format!("differ at q^({exponent}/{LATTICE}): {lhs} vs {rhs}")
                    }
                };
                let mut c = c.pass_if(r.passed());
                c.note = Some(format!("product form {}; quotient form {}", describe(&r.product_form), describe(&r.quotient_form)));
                c
            }
            Err(e) => c.error(e),
        }
    });
    report("entry24", settings, vec![check])
}

/// Everything: identities (both verifiers), corollaries, reproductions,
/// invariant checks, the degree-13 multiplier and the series identities.
pub fn run_suite(catalogue: &Catalogue, registry: &Registry, settings: &Settings) -> RunReport {
    let both = Settings { mode: IdentityMode::Both, ..settings.clone() };
    let parts = [
        run_identities(catalogue, &both, "all").expect("`all` always resolves"),
        run_corollaries(registry, settings, "all").expect("`all` always resolves"),
        run_reproduce(registry, settings, "all").expect("`all` always resolves"),
        run_invariants(registry, settings),
        run_multiplier13(settings),
        run_entry24(settings),
    ];
    let checks = parts.into_iter().flat_map(|p| p.checks).collect();
    report("run-suite", settings, checks)
}

fn report(suite: &str, settings: &Settings, checks: Vec<CheckRecord>) -> RunReport {
    RunReport { suite: suite.to_string(), version: VERSION, precision: settings.into(), checks }
}

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Rational64;
use serde_json::json;

use thetaprod::bignum::{digits_agreement, nome, PrecisionSpec};
use thetaprod::etaq::Catalogue;
use thetaprod::harness::{self, IdentityMode, Probes, RunReport, Settings};
use thetaprod::invariants::{invariant_numeric, registry_lookup, InvariantKind};
use thetaprod::products::{a_numeric, b_numeric, eval_form, Form, ProductKind};
use thetaprod::radicals::Registry;

// A closed pipe (e.g. `| head`) is not an error worth a panic.
macro_rules! out {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! out_raw {
    ($($t:tt)*) => {{
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "thetaprod", version, about = "Verify theta-function product evaluations and P-Q modular equations")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Target significant digits
    #[arg(long, global = true, default_value_t = harness::DEFAULT_DIGITS, value_parser = clap::value_parser!(u32).range(5..=2000))]
    digits: u32,
    /// Series truncation order on the 1/24 lattice
    #[arg(long, global = true, default_value_t = harness::DEFAULT_SERIES_ORDER, value_parser = clap::value_parser!(i64).range(24..))]
    series_order: i64,
    /// Comma-separated numeric probes, e.g. `0.01,0.05,nome`
    #[arg(long, global = true)]
    probes: Option<String>,
    /// Emit one JSON object per line
    #[arg(long, global = true)]
    json: bool,
    /// Identity catalogue file (defaults to the built-in one)
    #[arg(long, global = true)]
    catalogue: Option<PathBuf>,
    /// Corollary/invariant registry file (defaults to the built-in one)
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a_{m,n}
    EvalA { m: Ratio, n: Ratio },
    /// Evaluate b_{m,n}
    EvalB { m: Ratio, n: Ratio },
    /// Evaluate the class invariant g_n or G_n
    EvalInvariant { kind: Kind, n: Ratio },
    /// Evaluate the nome exp(-π√(m/n))
    EvalNome { m: Ratio, n: Ratio },
    /// Check catalogued modular equations
    VerifyIdentity {
        id: String,
        #[arg(long, group = "mode")]
        series: bool,
        #[arg(long, group = "mode")]
        numeric: bool,
        #[arg(long, group = "mode")]
        both: bool,
    },
    /// Check registry closed forms against their definitions
    VerifyCorollary { id: String },
    /// Rebuild corollaries through the modular-equation pipeline
    Reproduce { id: String },
    /// Run every suite
    RunSuite,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    #[value(name = "g")]
    SmallG,
    #[value(name = "G")]
    BigG,
}

/// A positive rational such as `10` or `10/3`.
#[derive(Clone, Copy)]
struct Ratio(Rational64);

impl FromStr for Ratio {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let r = Rational64::from_str(s.trim()).map_err(|_| format!("`{s}` is not a rational number"))?;
        if *r.numer() <= 0 {
            return Err(format!("`{s}` must be positive"));
        }
        Ok(Ratio(r))
    }
}

enum Failure {
    Usage(String),
    Eval(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Eval(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn load_catalogue(path: &Option<PathBuf>) -> Result<Catalogue, Failure> {
    match path {
        None => Ok(Catalogue::builtin()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            Catalogue::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        }
    }
}

fn load_registry(path: &Option<PathBuf>) -> Result<Registry, Failure> {
    match path {
        None => Ok(Registry::builtin()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            Registry::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        }
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let g = &cli.global;
    let probes = match &g.probes {
        Some(text) => Probes::parse(text).map_err(|e| Failure::Usage(e.to_string()))?,
        None => Probes::default(),
    };
    let mut settings = Settings { prec: PrecisionSpec::new(g.digits), series_order: g.series_order, probes, mode: IdentityMode::Both };
    let usage = |e: harness::HarnessError| Failure::Usage(e.to_string());
    let report = match cli.command {
        Command::EvalA { m, n } => return eval_product(ProductKind::A, m.0, n.0, g),
        Command::EvalB { m, n } => return eval_product(ProductKind::B, m.0, n.0, g),
        Command::EvalInvariant { kind, n } => return eval_invariant(kind, n.0, g),
        Command::EvalNome { m, n } => return eval_nome(m.0, n.0, g),
        Command::VerifyIdentity { id, series, numeric, .. } => {
            settings.mode = match (series, numeric) {
                (true, _) => IdentityMode::Series,
                (_, true) => IdentityMode::Numeric,
                _ => IdentityMode::Both,
            };
            harness::run_identities(&load_catalogue(&g.catalogue)?, &settings, &id).map_err(usage)?
        }
        Command::VerifyCorollary { id } => harness::run_corollaries(&load_registry(&g.registry)?, &settings, &id).map_err(usage)?,
        Command::Reproduce { id } => harness::run_reproduce(&load_registry(&g.registry)?, &settings, &id).map_err(usage)?,
        Command::RunSuite => harness::run_suite(&load_catalogue(&g.catalogue)?, &load_registry(&g.registry)?, &settings),
    };
    emit(&report, g.json);
    Ok(report.success())
}

fn emit(report: &RunReport, json: bool) {
    if json {
        for line in report.json_lines() {
            out!("{line}");
        }
    } else {
        out_raw!("{}", report.render_text());
    }
}

fn eval_product(kind: ProductKind, m: Rational64, n: Rational64, g: &Global) -> Result<bool, Failure> {
    let prec = PrecisionSpec::new(g.digits);
    let pv = match kind {
        ProductKind::A => a_numeric(m, n, &prec),
        ProductKind::B => b_numeric(m, n, &prec),
    }
    .map_err(|e| Failure::Eval(e.to_string()))?;
    let digits = g.digits as usize;
    // agreement of every alternative form with the primary one
    let mut agreement = Vec::new();
    for &form in &Form::all(kind)[1..] {
        let v = eval_form(form, m, n, &prec).map_err(|e| Failure::Eval(e.to_string()))?;
        agreement.push((form, digits_agreement(&pv.value, &v, f64::from(prec.working_digits()))));
    }
    if g.json {
        let forms: Vec<_> = agreement.iter().map(|(f, d)| json!({"form": f, "digits": d})).collect();
        out!(
            "{}",
            json!({"quantity": format!("{kind}_{m},{n}"), "m": m.to_string(), "n": n.to_string(), "digits": g.digits,
                   "value": pv.value.to_decimal_string(digits), "form_agreement": forms})
        );
    } else {
        out!("{kind}_{{{m},{n}}} = {}", pv.value.to_decimal_string(digits));
        for (form, d) in &agreement {
            out!("  {:?} agrees with {:?} to {d:.1} digits", form, Form::all(kind)[0]);
        }
    }
    Ok(true)
}

fn eval_invariant(kind: Kind, n: Rational64, g: &Global) -> Result<bool, Failure> {
    let prec = PrecisionSpec::new(g.digits);
    let kind = match kind {
        Kind::SmallG => InvariantKind::SmallG,
        Kind::BigG => InvariantKind::BigG,
    };
    let registry = load_registry(&g.registry)?;
    let (value, closed, source) = match registry_lookup(&registry, kind, n, &prec) {
        Ok(Some(v)) => (v.numeric, v.closed_form.map(|c| c.to_string()), Some(v.source)),
        Ok(None) => (invariant_numeric(kind, n, &prec).map_err(|e| Failure::Eval(e.to_string()))?, None, None),
        Err(e) => return Err(Failure::Eval(e.to_string())),
    };
    let id = kind.quantity(n).id();
    let text = value.to_decimal_string(g.digits as usize);
    if g.json {
        out!("{}", json!({"quantity": id, "digits": g.digits, "value": text, "closed_form": closed, "source": source}));
    } else {
        out!("{id} = {text}");
        if let (Some(c), Some(s)) = (closed, source) {
            out!("  closed form {c} [{s}]");
        }
    }
    Ok(true)
}

fn eval_nome(m: Rational64, n: Rational64, g: &Global) -> Result<bool, Failure> {
    let nm = nome(m, n, &PrecisionSpec::new(g.digits)).map_err(|e| Failure::Eval(e.to_string()))?;
    let text = nm.q.to_decimal_string(g.digits as usize);
    if g.json {
        out!("{}", json!({"quantity": "nome", "m": m.to_string(), "n": n.to_string(), "digits": g.digits, "value": text}));
    } else {
        out!("exp(-pi*sqrt({m}/{n})) = {text}");
    }
    Ok(true)
}

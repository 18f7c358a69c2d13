use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn thetaprod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thetaprod")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_lines(o: &Output) -> Vec<Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).expect("one JSON object per line")).collect()
}

fn without_timing(mut v: Vec<Value>) -> Vec<Value> {
    for obj in &mut v {
        obj.as_object_mut().unwrap().remove("wall_ms");
    }
    v
}

#[test]
fn eval_a_reports_value_and_form_agreement() {
    let o = thetaprod(&["eval-a", "2", "3", "--digits", "60"]);
    assert!(o.status.success());
    let text = stdout(&o);
    // (√2−1)·√(√3+√2), from mpmath
    assert!(text.starts_with("a_{2,3} = 0.73472009926199843317760786393527468988904950901990430544469"), "{text}");
    assert_eq!(text.lines().filter(|l| l.contains("agrees with ATheta")).count(), 2);
}

#[test]
fn eval_a_collapses_at_n_one() {
    let o = thetaprod(&["eval-a", "5", "1", "--digits", "30", "--json"]);
    assert!(o.status.success());
    let v = &json_lines(&o)[0];
    assert_eq!(v["value"], "1.00000000000000000000000000000");
}

#[test]
fn eval_invariant_shows_closed_form() {
    let o = thetaprod(&["eval-invariant", "g", "30", "--digits", "30", "--json"]);
    assert!(o.status.success());
    let v = &json_lines(&o)[0];
    assert_eq!(v["quantity"], "g_30");
    assert!(v["closed_form"].as_str().unwrap().contains("sqrt(10)+3"));
    assert!(v["value"].as_str().unwrap().starts_with("1.72233395641314906834"));
}

#[test]
fn eval_nome_and_b() {
    let o = thetaprod(&["eval-nome", "1", "1", "--digits", "20"]);
    // e^{-π}
    assert!(stdout(&o).contains("0.0432139182637722497"), "{}", stdout(&o));
    let o = thetaprod(&["eval-b", "3", "5", "--digits", "30"]);
    assert!(stdout(&o).contains("0.544498874680576110349643089403"));
}

#[test]
fn identity_json_is_deterministic() {
    let args = ["verify-identity", "all", "--numeric", "--digits", "40", "--probes", "0.05,nome", "--json"];
    let a = thetaprod(&args);
    let b = thetaprod(&args);
    assert!(a.status.success());
    let (a, b) = (without_timing(json_lines(&a)), without_timing(json_lines(&b)));
    assert_eq!(a, b);
    // 20 identities at two probes, then the summary
    assert_eq!(a.len(), 41);
    assert!(a[..40].iter().all(|c| c["verdict"] == "pass" && c["run_suite"] == "identities" && c["source"].is_string()));
    assert_eq!(a[40]["success"], true);
}

#[test]
fn series_mode_checks_each_identity_once() {
    let o = thetaprod(&["verify-identity", "thm3.3", "--series", "--series-order", "240", "--json"]);
    assert!(o.status.success());
    let v = json_lines(&o);
    assert_eq!(v.len(), 2);
    assert_eq!(v[0]["id"], "thm3.3@series");
    assert_eq!(v[0]["inputs"]["order"], "240");
}

#[test]
fn misprinted_corollary_exits_with_failure() {
    let ok = thetaprod(&["verify-corollary", "a_10_3", "--digits", "60"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = thetaprod(&["verify-corollary", "a_26_5", "--digits", "60"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).starts_with("FAIL"));
}

#[test]
fn reproduce_reports_lambda_route() {
    let o = thetaprod(&["reproduce", "a_6_13", "--digits", "60", "--json"]);
    assert!(o.status.success());
    let v = &json_lines(&o)[0];
    assert_eq!(v["inputs"]["lambda_route"], "companion:deg13");
    assert!(v["digits"].as_f64().unwrap() >= 60.0);
}

#[test]
fn usage_errors_are_distinct() {
    for args in [
        &["verify-identity", "nope"][..],
        &["reproduce", "g_30"],
        &["frobnicate"],
        &["eval-a", "2"],
        &["eval-a", "-1", "3"],
        &["verify-identity", "all", "--probes", "2.5"],
        &["verify-identity", "all", "--series", "--numeric"],
        &["run-suite", "--registry", "/nonexistent/registry.txt"],
    ] {
        assert_eq!(thetaprod(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn custom_registry_file() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "a 2 3 = (sqrt(2)-1)*(sqrt(3)+sqrt(2))^(1/2)  # test").unwrap();
    writeln!(f, "a 4 3 = (sqrt(3)-sqrt(2))^2  # deliberately wrong").unwrap();
    let path = f.path().to_str().unwrap();
    let o = thetaprod(&["verify-corollary", "all", "--digits", "40", "--registry", path, "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json_lines(&o);
    assert_eq!(v[0]["verdict"], "pass");
    assert_eq!(v[1]["verdict"], "fail");
    assert_eq!(v[0]["source"], "test");

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    writeln!(bad, "a 2 = 1").unwrap();
    let o = thetaprod(&["verify-corollary", "all", "--registry", bad.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_normsol"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

struct Models {
    dir: TempDir,
}

impl Models {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, text: &str| std::fs::write(dir.path().join(name), text).unwrap();
        write("cubic.json", r#"{"G": {"power": 2}, "K": {"power": 2}, "F": {"terms": [{"c": 0.25, "r": 4}]}}"#);
        write("quintic.json", r#"{"builtin": "quintic"}"#);
        write("sign.json", r#"{"builtin": "sign-changing"}"#);
        write("gap.json", r#"{"builtin": "cosine-gap", "p": 3}"#);
        write("s8.json", r#"{"G": {"power": 2}, "K": {"power": 2}, "F": {"terms": [{"c": 0.125, "r": 8}]}}"#);
        write("broken.json", r#"{"G": 2"#);
        write("bad_exponent.json", r#"{"G": {"power": 2}, "K": {"power": 2}, "F": {"terms": [{"c": 1, "r": 0.5}]}}"#);
        Models { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn branch_csv_has_closed_form_masses() {
    let m = Models::new();
    let o = run(&["--model", &m.path("cubic.json"), "branch", "--lambda", "0.25:4:9"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,m_lambda,rho_lambda,quad_error");
    assert_eq!(lines.len(), 10);
    for l in &lines[1..] {
        let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[2] - 4.0 * v[0].sqrt()).abs() < 1e-8);
    }
}

#[test]
fn branch_output_is_byte_identical_across_runs() {
    let m = Models::new();
    let a = m.file("a.csv");
    let b = m.file("b.csv");
    for p in [&a, &b] {
        let o = run(&["--model", &m.path("sign.json"), "--out", p.to_str().unwrap(), "branch", "--lambda", "0.01:100:17"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn branch_json_format() {
    let m = Models::new();
    let o = run(&["--model", &m.path("cubic.json"), "--format", "json", "branch", "--lambda", "1:4:3"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["points"].as_array().unwrap().len(), 3);
    assert_eq!(v["monotone_m_flag"], true);
}

#[test]
fn degenerate_model_exits_2_and_lists_lambda() {
    let m = Models::new();
    let o = run(&["--model", &m.path("gap.json"), "branch", "--lambda", "0.25:4:9"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("lambda = 1 "), "{}", stderr(&o));
    let o = run(&["--model", &m.path("gap.json"), "branch", "--lambda", "1:1.0000001:2"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn solve_mass_cubic() {
    let m = Models::new();
    let o = run(&["--model", &m.path("cubic.json"), "solve-mass", "--rho", "4"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let lambda = v["solutions"][0]["lambda"].as_f64().unwrap();
    assert!((lambda - 1.0).abs() < 1e-6);
    let o = run(&["--model", &m.path("cubic.json"), "--format", "csv", "solve-mass", "--rho", "4"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("lambda,rho_lambda,residual\n"));
}

#[test]
fn solve_mass_without_solution_exits_2() {
    let m = Models::new();
    let o = run(&["--model", &m.path("quintic.json"), "solve-mass", "--rho", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no lambda in range"));
}

#[test]
fn window_reports_cases() {
    let m = Models::new();
    let o = run(&["--model", &m.path("quintic.json"), "window"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["cases"], serde_json::json!([]));
    assert_eq!(v["windows"], serde_json::json!([]));
    let o = run(&["--model", &m.path("sign.json"), "window"]);
    let v = json(&o);
    assert_eq!(v["windows"][0]["hi"], "inf");
    let lo = v["windows"][0]["lo"].as_f64().unwrap();
    assert!((lo - 4.0 * std::f64::consts::SQRT_2 * std::f64::consts::PI / 3.0).abs() < 1e-6);
    let o = run(&["--model", &m.path("sign.json"), "--format", "csv", "window"]);
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(",inf"));
}

fn profile_to(m: &Models, name: &str, lambda: &str) -> PathBuf {
    let out = m.file(name);
    let o = run(&[
        "--model",
        &m.path("cubic.json"),
        "--out",
        out.to_str().unwrap(),
        "profile",
        "--lambda",
        lambda,
        "--nodes",
        "2001",
        "--x-max",
        "30",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn profile_round_trip_through_verify() {
    let m = Models::new();
    let prof = profile_to(&m, "p.csv", "1");
    let o = run(&["--model", &m.path("cubic.json"), "verify", "--input", prof.to_str().unwrap(), "--lambda", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    for key in ["nehari_rel", "pohozaev_rel", "equipartition_sup"] {
        assert!(v[key].as_f64().unwrap() <= 1e-7, "{key}: {}", v[key]);
    }
    assert!((v["mass_K"].as_f64().unwrap() - 4.0).abs() < 1e-5);
}

#[test]
fn verify_rejects_wrong_lambda_with_exit_2() {
    let m = Models::new();
    let prof = profile_to(&m, "p.csv", "1");
    let o = run(&["--model", &m.path("cubic.json"), "verify", "--input", prof.to_str().unwrap(), "--lambda", "1.1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("exceeds"));
}

#[test]
fn verify_config_errors_exit_3() {
    let m = Models::new();
    let junk = m.file("junk.csv");
    std::fs::write(&junk, "a,b\n1,2\n").unwrap();
    let o = run(&["--model", &m.path("cubic.json"), "verify", "--input", junk.to_str().unwrap(), "--lambda", "1"]);
    assert_eq!(code(&o), 3);
    let prof = profile_to(&m, "p.csv", "1");
    let o = run(&["--model", &m.path("cubic.json"), "verify", "--input", prof.to_str().unwrap(), "--lambda", "1", "--m", "2"]);
    assert_eq!(code(&o), 3);
    let o = run(&["--model", &m.path("cubic.json"), "verify", "--input", "/nonexistent.csv", "--lambda", "1"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn minimize_subcritical_and_field_verification() {
    let m = Models::new();
    let o = run(&["--model", &m.path("cubic.json"), "minimize", "--rho", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert!((v["energy"].as_f64().unwrap() + 2.0 / 3.0).abs() < 1e-3);
    assert!((v["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert_eq!(v["converged"], true);

    let field = m.file("field.csv");
    let o = run(&["--model", &m.path("cubic.json"), "--format", "csv", "--out", field.to_str().unwrap(), "minimize", "--rho", "4"]);
    assert_eq!(code(&o), 0);
    let lambda = v["lambda"].as_f64().unwrap().to_string();
    // identity closure tolerance for minimizers
    let o = run(&["--model", &m.path("cubic.json"), "--tol", "1e-3", "verify", "--input", field.to_str().unwrap(), "--lambda", &lambda]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert!(v["equipartition_sup"].is_null());
    assert!(v["pohozaev_rel"].as_f64().unwrap() < 1e-5 && v["nehari_rel"].as_f64().unwrap() < 1e-5);
}

#[test]
fn minimize_supercritical() {
    let m = Models::new();
    let o = run(&["--model", &m.path("s8.json"), "minimize", "--rho", "1", "--regime", "super"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert!(v["energy"].as_f64().unwrap() > 0.0 && v["lambda"].as_f64().unwrap() > 0.0);
    assert!((v["mass"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn minimize_failures_exit_2() {
    let m = Models::new();
    let o = run(&["--model", &m.path("cubic.json"), "minimize", "--rho", "4", "--regime", "super"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("F2"), "{}", stderr(&o));
    let o = run(&["--model", &m.path("cubic.json"), "minimize", "--rho", "4", "--max-iter", "1"]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o)["converged"], false);
}

#[test]
fn minimize_bad_grid_exits_3() {
    let m = Models::new();
    let o = run(&["--model", &m.path("cubic.json"), "minimize", "--rho", "4", "--n", "1000"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn gn_constant_p6() {
    let o = run(&["gn", "--p", "6"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let c = json(&o)["c_p_pth_power"].as_f64().unwrap();
    assert!((c / (4.0 / std::f64::consts::PI.powi(2)) - 1.0).abs() < 1e-2);
    let o = run(&["gn", "--p", "2"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn config_errors_exit_3() {
    let m = Models::new();
    let cases: Vec<Vec<String>> = vec![
        vec!["--model".into(), m.path("missing.json"), "branch".into(), "--lambda".into(), "1:2:3".into()],
        vec!["--model".into(), m.path("broken.json"), "window".into()],
        vec!["--model".into(), m.path("bad_exponent.json"), "window".into()],
        vec!["--model".into(), m.path("cubic.json"), "branch".into(), "--lambda".into(), "4:1:3".into()],
        vec!["--model".into(), m.path("cubic.json"), "branch".into(), "--lambda".into(), "1:2".into()],
        vec!["--model".into(), m.path("cubic.json"), "--tol".into(), "-1".into(), "window".into()],
        vec!["--model".into(), m.path("cubic.json"), "profile".into(), "--lambda".into(), "1".into(), "--nodes".into(), "100".into()],
        vec!["window".into()],
        vec!["branch".into()],
        vec!["frobnicate".into()],
        vec!["--format".into(), "xml".into(), "window".into()],
    ];
    for args in cases {
        let o = bin().args(&args).output().unwrap();
        assert_eq!(code(&o), 3, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn help_and_version_exit_0() {
    for flag in ["--help", "--version"] {
        let o = run(&[flag]);
        assert_eq!(code(&o), 0);
    }
    let o = run(&["minimize", "--help"]);
    assert!(stdout(&o).contains("default: 1024"));
}

#[test]
fn unwritable_output_exits_3() {
    let m = Models::new();
    let out = Path::new("/nonexistent-dir/out.csv");
    let o = run(&["--model", &m.path("cubic.json"), "--out", out.to_str().unwrap(), "branch", "--lambda", "1:2:3"]);
    assert_eq!(code(&o), 3);
}

use std::path::Path;
use std::process::{Command, Output};

use qincompat_core::matrix;
use qincompat_core::qobjects::qc_channel;
use qincompat_core::{ChoiMatrix, Povm};
use serde_json::Value;

fn qincompat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qincompat")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn write(dir: &Path, name: &str, value: &impl serde::Serialize) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn x_basis() -> Povm {
    let (_, v) = matrix::eig_hermitian(&matrix::pauli_x()).unwrap();
    Povm::from_basis(&v).unwrap()
}

#[test]
fn identity_pair_channels_report() {
    let dir = tempfile::tempdir().unwrap();
    let id = ChoiMatrix::identity(2).unwrap();
    let input = write(dir.path(), "ch.json", &vec![id.clone(), id]);
    let out = qincompat(&["robustness", "channels", "--input", &input]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert!((r["result"]["robustness"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-6);
    assert_eq!(r["result"]["kind"], "channels");
    assert!(r["result"]["witness"].is_object());
    assert!(r["solver"]["gap_tol"].is_number());
}

#[test]
fn compatible_channels_have_zero_robustness() {
    let dir = tempfile::tempdir().unwrap();
    let rho = matrix::projector(&matrix::ket(2, 0));
    let constant = ChoiMatrix::constant(2, &rho).unwrap();
    let input = write(dir.path(), "ch.json", &vec![ChoiMatrix::identity(2).unwrap(), constant]);
    let out = qincompat(&["robustness", "channels", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    assert!(report(&out)["result"]["robustness"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn measurement_and_pair_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (z, x) = (Povm::computational(2), x_basis());
    let input = write(dir.path(), "m.json", &vec![z.clone(), x.clone()]);
    let out = qincompat(&["robustness", "measurements", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    let rm = report(&out)["result"]["robustness"].as_f64().unwrap();

    let chs = vec![qc_channel(&z).unwrap(), qc_channel(&x).unwrap()];
    let input = write(dir.path(), "qc.json", &chs);
    let rc = report(&qincompat(&["robustness", "channels", "--input", &input]))["result"]["robustness"].as_f64().unwrap();
    assert!(rm > 0.1 && (rm - rc).abs() < 1e-6);

    let pair = serde_json::json!({"povm": z, "channel": ChoiMatrix::identity(2).unwrap()});
    let input = write(dir.path(), "pair.json", &pair);
    let out = qincompat(&["robustness", "pair", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    assert!(report(&out)["result"]["robustness"].as_f64().unwrap() > 0.1);
}

#[test]
fn truncated_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.json");
    std::fs::write(&input, "[\n  {\"dim_in\": 2,\n").unwrap();
    let out_path = dir.path().join("report.json");
    let out = qincompat(&["robustness", "channels", "--input", input.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.json:3:"), "{stderr}");
    assert!(!out_path.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn invalid_objects_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let not_a_povm = r#"[{"dim": 2, "elements": [{"rows": 2, "cols": 2, "data": [[1,0],[0,0],[0,0],[0,0]]}]}]"#;
    let input = dir.path().join("m.json");
    std::fs::write(&input, not_a_povm).unwrap();
    let out = qincompat(&["robustness", "measurements", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = qincompat(&["robustness", "channels", "--input", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_channel_witness_suite() {
    let out = qincompat(&["verify", "theorem1", "--dim", "2", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["passed"], true);
    let ratio = r["result"]["instances"][0]["ratio"].as_f64().unwrap();
    assert!((ratio - 4.0 / 3.0).abs() < 1e-5);
    for check in r["checks"].as_array().unwrap() {
        assert!(check["tolerance"].is_number());
    }
}

#[test]
fn verify_bound_and_reduction_suites() {
    let out = qincompat(&["verify", "appendixC", "--dim", "2", "--trials", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!(r["result"]["max_ratio"].as_f64().unwrap() <= 1.2 + 1e-6);
    assert_eq!(r["result"]["bound"].as_f64().unwrap(), 1.2);

    for suite in ["prop1", "prop2", "theorem2", "duality"] {
        let out = qincompat(&["verify", suite, "--seed", "7", "--trials", "2"]);
        assert_eq!(out.status.code(), Some(0), "{suite}");
        assert_eq!(report(&out)["seed"], 7);
    }
}

#[test]
fn demos() {
    let r = report(&qincompat(&["demo", "bb84"]));
    assert!((r["result"]["success_probability"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let r = report(&qincompat(&["demo", "identity-pair", "--dim", "3"]));
    assert!((r["result"]["advantage"].as_f64().unwrap() - 1.5).abs() < 1e-6);
    let r = report(&qincompat(&["demo", "cloning", "--dim", "2"]));
    assert!((r["result"]["visibility"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(r["passed"], true);
}

#[test]
fn unknown_names_are_input_errors() {
    assert_eq!(qincompat(&["demo", "nope"]).status.code(), Some(1));
    assert_eq!(qincompat(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qincompat(&["verify", "theorem3"]).status.code(), Some(1));
    assert_eq!(qincompat(&["demo", "bb84", "--tol-gap", "-1"]).status.code(), Some(1));
    assert_eq!(qincompat(&["demo", "cloning", "--dim", "1"]).status.code(), Some(1));
}

#[test]
fn solver_failure_and_failed_checks_have_distinct_codes() {
    // A gap tolerance below machine precision cannot be met.
    assert_eq!(qincompat(&["demo", "identity-pair", "--tol-gap", "1e-30"]).status.code(), Some(2));
    // Loose tolerances give inaccurate values that fail the checks.
    assert_eq!(qincompat(&["demo", "identity-pair", "--tol-gap", "0.3", "--tol-feas", "0.3"]).status.code(), Some(3));
}

#[test]
fn reports_are_reproducible() {
    let strip = |out: &Output| {
        let mut v = report(out);
        v.as_object_mut().unwrap().remove("generated_at");
        v.to_string()
    };
    let args = ["verify", "prop1", "--seed", "11", "--trials", "3"];
    assert_eq!(strip(&qincompat(&args)), strip(&qincompat(&args)));
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = qincompat(&["demo", "bb84", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "demo bb84");
}

use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cayley-qmc")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

const POINT: [&str; 6] = ["--j0", "1", "--j", "0.5", "--beta", "0.8"];

fn with_point<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(POINT).collect()
}

#[test]
fn solve_reports_three_branches() {
    let v = json(&run(&with_point(&["solve"])));
    assert_eq!(v["ordered"], "present");
    assert_eq!(v["classification"], "phase_transition");
    let sols = v["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 3);
    for s in sols {
        assert!(s["residual"].as_f64().unwrap() < 1e-10);
    }
    assert!(v["delta"].as_f64().unwrap() > 0.0);
}

#[test]
fn solve_flags_indefinite_ordered_roots() {
    let v = json(&run(&["solve", "--j0", "0.5", "--j", "1", "--beta", "1"]));
    assert_eq!(v["ordered"], "not_positive");
    assert_eq!(v["solutions"].as_array().unwrap().len(), 1);
}

#[test]
fn solve_is_byte_deterministic() {
    let a = run(&with_point(&["solve"]));
    let b = run(&with_point(&["solve"]));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn floats_use_seventeen_digits() {
    let out = run(&with_point(&["solve"]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"beta\": 8.0000000000000004e-1"), "{text}");
}

#[test]
fn singular_parameters_exit_two() {
    let out = run(&["solve", "--j0", "1", "--j", "-1", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular"));
}

#[test]
fn unknown_flag_exits_sixty_four() {
    assert_eq!(run(&["solve", "--bogus"]).status.code(), Some(64));
    assert_eq!(run(&["nonsense"]).status.code(), Some(64));
    assert_eq!(run(&with_point(&["evaluate", "--observable", "x.json", "--branch", "sideways"])).status.code(), Some(64));
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn phase_diagram_csv_shape() {
    let out = run(&["phase-diagram", "--beta", "1", "--resolution", "50"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "j,j0,delta,classification,threshold");
    assert_eq!(lines.len(), 2501);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
}

#[test]
fn phase_diagram_json_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pd.json");
    let out = run(&[
        "phase-diagram", "--beta", "0.3", "--resolution", "4", "--j-min", "-1", "--j-max", "1", "--format", "json",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r["agrees"] == true));
}

#[test]
fn evaluate_matches_dense_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.json");
    std::fs::write(
        &path,
        r#"{"terms":[{"coeff":[1,0],"factors":[{"site":[],"pauli":"Z"},{"site":[1,2],"pauli":"Z"}]},
                     {"coeff":[0.5,0],"factors":[{"site":[2],"matrix":[[[1,0],[0,0]],[[0,0],[0,0]]]}]}]}"#,
    )
    .unwrap();
    for branch in ["plus", "minus", "disordered"] {
        let args = with_point(&["evaluate", "--observable", path.to_str().unwrap(), "--branch", branch, "--depth", "2"]);
        let v = json(&run(&args));
        let rec = v["value"][0].as_f64().unwrap();
        let fin = v["finite_value"][0].as_f64().unwrap();
        assert!((rec - fin).abs() < 1e-10, "{branch}: {rec} vs {fin}");
    }
}

#[test]
fn evaluate_rejects_bad_observable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"terms":[{"coeff":[1,0],"factors":[{"site":[3],"pauli":"Z"}]}]}"#).unwrap();
    let out = run(&with_point(&["evaluate", "--observable", path.to_str().unwrap()]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resource_guard_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.json");
    std::fs::write(&path, r#"{"terms":[{"coeff":[1,0],"factors":[{"site":[1],"pauli":"Z"}]}]}"#).unwrap();
    let out = run(&with_point(&["evaluate", "--observable", path.to_str().unwrap(), "--depth", "4"]));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn ordered_branch_without_ordered_phase_exits_two() {
    let out = run(&["projector", "--j0", "0.1", "--j", "0", "--beta", "0.1", "--n", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn projector_closed_matches_recursive() {
    let v = json(&run(&with_point(&["projector", "--n", "2", "--branch", "minus"])));
    for row in v["rows"].as_array().unwrap() {
        let closed = row["closed"].as_f64().unwrap();
        let rec = row["recursive"][0].as_f64().unwrap();
        assert!((closed - rec).abs() < 1e-10);
    }
}

#[test]
fn cluster_rows_decay() {
    let v = json(&run(&with_point(&["cluster", "--max-level", "6"])));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let dev: Vec<f64> = rows.iter().map(|r| r["deviation"].as_f64().unwrap()).collect();
    assert!(dev.windows(2).all(|w| w[1] < w[0]));
    let lam = v["lambda"].as_f64().unwrap().abs();
    assert!((v["fitted_ratio"].as_f64().unwrap() - lam).abs() < 0.1 * lam);
}

#[test]
fn coeffs_agree() {
    let v = json(&run(&with_point(&["coeffs"])));
    assert!(v["max_rel_diff"].as_f64().unwrap() < 1e-12);
    let v = json(&run(&["coeffs", "--j0", "0", "--j", "1", "--beta", "0.5"]));
    assert_eq!(v["xy_only"]["alpha_check"]["displayed_matches"], false);
}

#[test]
fn thread_cap_is_honoured_and_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_cayley-qmc"))
        .args(["phase-diagram", "--beta", "1", "--resolution", "5"])
        .env("QMC_TREE_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let base = run(&["phase-diagram", "--beta", "1", "--resolution", "5"]);
    assert_eq!(out.stdout, base.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_cayley-qmc"))
        .args(["phase-diagram", "--beta", "1"])
        .env("QMC_TREE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn verify_passes() {
    let out = run(&["verify", "--format", "json"]);
    let v = json(&out);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r["passed"] == true));
}

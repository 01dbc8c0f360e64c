//! End-to-end runs of the `qre` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn qre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qre"))
        .args(args)
        .env_remove("QRE_NUM_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn entry(m: &Value, r: usize, c: usize) -> (f64, f64) {
    let z = &m[r][c];
    (z[0].as_f64().unwrap(), z[1].as_f64().unwrap())
}

fn assert_diag(m: &Value, d: &[f64], tol: f64) {
    for (r, row) in m.as_array().unwrap().iter().enumerate() {
        for c in 0..row.as_array().unwrap().len() {
            let (re, im) = entry(m, r, c);
            let want = if r == c { d[r] } else { 0.0 };
            assert!((re - want).abs() <= tol && im.abs() <= tol, "entry ({r},{c}) = {re}+{im}i");
        }
    }
}

#[test]
fn feasibility_of_infeasible_qubit() {
    let out = qre(&["feasibility", fixture("qubit_12.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let doc = json(&out);
    assert_eq!(doc["classification"], "Infeasible");
    assert!((doc["mu"].as_f64().unwrap() - 0.1 * std::f64::consts::SQRT_2).abs() < 1e-6);
}

#[test]
fn feasibility_of_pinned_qubit() {
    let out = qre(&["feasibility", fixture("qubit_10.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["classification"], "FeasibleSingular");
}

#[test]
fn estimate_full_rank_qubit() {
    let out = qre(&["estimate", fixture("qubit_05.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    assert_diag(&doc["rho_hat"], &[0.75, 0.25], 1e-9);
    assert!(doc["residual_inf"].as_f64().unwrap() < 1e-9);
    assert_eq!(doc["reduction"]["used"], false);
    assert_eq!(doc["relaxation"]["kind"], "none");
}

#[test]
fn estimate_pinned_qubit_reduces() {
    let out = qre(&["estimate", fixture("qubit_10.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_diag(&doc["rho_hat"], &[1.0, 0.0], 1e-9);
    assert_eq!(doc["reduction"]["used"], true);
    assert_eq!(doc["reduction"]["n1"], 1);
}

#[test]
fn estimate_refuses_infeasible_without_flag() {
    let out = qre(&["estimate", fixture("qubit_12.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["classification"], "Infeasible");
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn estimate_auto_relax() {
    let out = qre(&["estimate", "--auto-relax", fixture("qubit_12.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    assert_eq!(doc["relaxation"]["kind"], "isotropic");
    assert!((doc["relaxation"]["factor"].as_f64().unwrap() - 1.0 / 1.2).abs() < 1e-9);
    assert_diag(&doc["rho_hat"], &[1.0, 0.0], 1e-8);
}

#[test]
fn relax_prints_relaxed_estimates() {
    let out = qre(&["relax", fixture("qubit_12.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert!((doc["factor"].as_f64().unwrap() - 1.0 / 1.2).abs() < 1e-9);
    assert!((doc["relaxed_estimates"][0].as_f64().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn output_file_and_raw_precision() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = qre(&["feasibility", "--raw", "--output", path.to_str().unwrap(), fixture("qubit_05.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let raw: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();

    let rounded = json(&qre(&["feasibility", fixture("qubit_05.json").to_str().unwrap()]));
    let (a, b) = (raw["mu"].as_f64().unwrap(), rounded["mu"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-11 * a.abs());
    assert!(format!("{b:e}").trim_start_matches('-').len() <= 18);
}

#[test]
fn batch_runs_every_file() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["qubit_05.json", "qubit_10.json", "qubit_12.json"] {
        std::fs::copy(fixture(name), dir.path().join(name)).unwrap();
    }
    std::fs::write(dir.path().join("broken.json"), "{\"dimension\": 2,").unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();

    let serial = qre(&["estimate", "--batch", dir.path().to_str().unwrap()]);
    let parallel = Command::new(env!("CARGO_BIN_EXE_qre"))
        .args(["estimate", "--batch", dir.path().to_str().unwrap()])
        .env("QRE_NUM_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(serial.stdout, parallel.stdout);
    assert_eq!(serial.status.code(), Some(1));

    let doc = json(&serial);
    let files: Vec<&str> = doc.as_array().unwrap().iter().map(|e| e["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["broken.json", "qubit_05.json", "qubit_10.json", "qubit_12.json"]);
    let codes: Vec<i64> = doc.as_array().unwrap().iter().map(|e| e["exit"].as_i64().unwrap()).collect();
    assert_eq!(codes, [1, 0, 0, 2]);
    assert!(doc[0]["error"].as_str().unwrap().contains("line"));
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("problem.json");
    let sim = qre(&["simulate", "--reliability", "--output", problem.to_str().unwrap(), fixture("qubit_pauli_sim.json").to_str().unwrap()]);
    assert_eq!(sim.status.code(), Some(0), "{}", String::from_utf8_lossy(&sim.stderr));
    let again = qre(&["simulate", "--reliability", fixture("qubit_pauli_sim.json").to_str().unwrap()]);
    assert_eq!(json(&again), serde_json::from_str::<Value>(&std::fs::read_to_string(&problem).unwrap()).unwrap());

    let out = qre(&["estimate", "--auto-relax", problem.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rho = &json(&out)["rho_hat"];
    // true state [[0.7, 0.1−0.2i], [0.1+0.2i, 0.3]] from 10⁴ shots per Pauli
    let (a, _) = entry(rho, 0, 0);
    let (re, im) = entry(rho, 0, 1);
    assert!((a - 0.7).abs() < 0.03);
    assert!((re - 0.1).abs() < 0.03 && (im + 0.2).abs() < 0.03);
}

#[test]
fn malformed_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"dimension\": 2, \"observables\": [], \"estimates\": [1.0]}").unwrap();
    let out = qre(&["estimate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("estimates"));

    let missing = qre(&["feasibility", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(qre(&["estimate"]).status.code(), Some(1));
}

use std::process::Command;

use qcausal::channel::{gate_to_json, gate_zoo, GateSpec};
use qcausal::cli::{CSV_HEADER, EXIT_USAGE};

fn qcausal(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qcausal"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).expect("valid JSON")
}

#[test]
fn quantify_cnot_causal() {
    let (code, out, _) = qcausal(&["quantify", "--gate", "cnot", "--which", "causal"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!((v["C"]["value"].as_f64().unwrap() - 2.0).abs() <= 1e-3);
    assert!(v.get("S").is_none());
}

#[test]
fn quantify_identity_both_vanish() {
    let (code, out, _) = qcausal(&["quantify", "--gate", "identity", "--which", "both"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!(v["S"]["value"].as_f64().unwrap() <= 1e-6);
    assert!(v["C"]["value"].as_f64().unwrap() <= 1e-6);
    assert_eq!(v["bounds_ok"], true);
}

#[test]
fn quantify_gate_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("swap.json");
    std::fs::write(
        &path,
        gate_to_json(&gate_zoo(&GateSpec::Swap).unwrap()).unwrap(),
    )
    .unwrap();
    let arg = format!("file:{}", path.display());
    let (code, out, _) = qcausal(&["quantify", "--gate", &arg, "--which", "signalling"]);
    assert_eq!(code, 0);
    assert!(json(&out)["S"]["value"].as_f64().unwrap() >= 1.0 - 1e-6);

    std::fs::write(&path, "{\"dims\": {}}").unwrap();
    assert_eq!(qcausal(&["quantify", "--gate", &arg]).0, EXIT_USAGE);
}

#[test]
fn quantify_text_output() {
    let (code, out, _) = qcausal(&[
        "quantify", "--gate", "cz", "--theta", "1.0", "--out", "text",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("S = 0.479"));
    assert!(out.contains("C = 0.958"));
    assert!(out.contains("bounds: ok"));
}

#[test]
fn sweep_rows_are_ordered_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    let two = dir.path().join("two.csv");
    let pi = std::f64::consts::PI.to_string();
    for (path, threads) in [(&one, "1"), (&two, "3")] {
        let p = path.to_str().unwrap();
        let (code, _, err) = qcausal(&[
            "sweep",
            "--family",
            "cz",
            "--from",
            "0",
            "--to",
            &pi,
            "--steps",
            "5",
            "--out",
            p,
            "--threads",
            threads,
        ]);
        assert_eq!(code, 0, "{err}");
    }
    let a = std::fs::read(&one).unwrap();
    assert_eq!(a, std::fs::read(&two).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    let thetas: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(thetas.windows(2).all(|w| w[0] < w[1]));
    assert!(rows[0][2].parse::<f64>().unwrap() <= 1e-6);
    assert!(rows[0][4].parse::<f64>().unwrap() <= 1e-6);
    for r in &rows {
        assert_eq!(r[6], "true");
        assert_eq!(r[7], "true");
        assert_eq!(r[8], "0");
    }
}

#[test]
fn sweep_pswap_quarter_turn() {
    let (code, out, _) = qcausal(&[
        "sweep",
        "--family",
        "pswap",
        "--from",
        "0",
        "--to",
        &std::f64::consts::FRAC_PI_2.to_string(),
        "--steps",
        "2",
        "--out",
        "-",
    ]);
    assert_eq!(code, 0);
    let last = out.lines().last().unwrap();
    let c: f64 = last.split(',').nth(4).unwrap().parse().unwrap();
    assert!((c - 2.0).abs() <= 1e-3, "{c}");
}

#[test]
fn sweep_rejects_unwritable_path() {
    let (code, _, err) = qcausal(&[
        "sweep",
        "--family",
        "cz",
        "--from",
        "0",
        "--to",
        "1",
        "--steps",
        "2",
        "--out",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("/nonexistent/dir/x.csv"));
}

#[test]
fn verify_rejects_zero_trials() {
    assert_eq!(qcausal(&["verify", "--trials", "0"]).0, EXIT_USAGE);
}

#[test]
fn witness_cross_check() {
    let (code, out, _) = qcausal(&["witness", "--gate", "cnot", "--cross-check"]);
    assert_eq!(code, 0);
    assert!(out.contains("|++-->"));
    assert!(out.contains("certified lower bound on C(cnot): 2.0"));
    assert!(out.contains("agree"));

    let (code, out, _) = qcausal(&["witness", "--json", "--cross-check"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!(v["cross_check"]["difference"].as_f64().unwrap() <= 1e-3);
    assert_eq!(v["output"], "|++-->");
}

#[test]
fn witness_rejects_other_gates() {
    let (code, _, err) = qcausal(&["witness", "--gate", "swap"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("swap"));
}

use std::f64::consts::PI;
use std::fs;
use std::process::{Command, Output};

fn berryloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_berryloop"))
        .args(args)
        .env("BERRYLOOP_THREADS", "2")
        .output()
        .expect("spawn berryloop")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_field(o: &Output, path: &[&str]) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    path.iter().fold(v, |v, k| v[*k].clone())
}

#[test]
fn pools_report_sizes() {
    let o = berryloop(&["pools", "--sites", "4", "--u", "0"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "hamiltonian pool size 18\nexcitation pool size 616\n"
    );
    let o = berryloop(&["pools", "--u", "10", "--list"]);
    let text = stdout(&o);
    assert!(text.starts_with("hamiltonian pool size 22\n"));
    assert_eq!(text.lines().count(), 2 + 2 + 22 + 616);
}

#[test]
fn ed_berry_prints_pi() {
    let o = berryloop(&["ed-berry", "--delta", "-0.5", "--u", "0"]);
    assert!(o.status.success());
    let phi = json_field(&o, &["phi_b_principal"]).as_f64().unwrap();
    assert!((phi - PI).abs() < 1e-6);
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(berryloop(&["loop", "--bogus"]).status.code(), Some(2));
    assert_eq!(berryloop(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(berryloop(&["loop", "--T", "-3"]).status.code(), Some(2));
    assert_eq!(berryloop(&["pools", "--sites", "3"]).status.code(), Some(2));
    assert_eq!(
        berryloop(&["sweep", "--axis", "sideways", "--values", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(berryloop(&["sweep", "--T", "5"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"model\": 3}").unwrap();
    let o = berryloop(&["loop", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let missing = tmp.path().join("missing.json");
    let o = berryloop(&["loop", "--config", missing.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
    assert!(berryloop(&["--help"]).status.success());
}

#[test]
fn ground_reports_preparation() {
    let o = berryloop(&["ground", "--delta", "-0.3", "--u", "0"]);
    assert!(o.status.success());
    let e = json_field(&o, &["energy"]).as_f64().unwrap();
    let exact = json_field(&o, &["exact_energy"]).as_f64().unwrap();
    assert!((e - exact).abs() < 1e-6);
    assert!(json_field(&o, &["infidelity"]).as_f64().unwrap() < 1e-6);
    assert!(json_field(&o, &["cnot"]).as_u64().unwrap() > 0);
}

#[test]
fn loop_writes_files_and_prints_result() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = berryloop(&[
        "loop", "--delta", "-0.9", "--u", "0", "--T", "4", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let phi = json_field(&o, &["result", "phi_b_principal"]).as_f64().unwrap();
    assert!((phi.abs() - PI).abs() < 1e-2, "{phi}");
    assert_eq!(json_field(&o, &["config", "protocol", "T"]).as_f64(), Some(4.0));
    let printed = stdout(&o);
    assert_eq!(fs::read_to_string(out.join("result.json")).unwrap(), printed);
    assert!(out.join("trajectory.csv").exists());

    // The echoed configuration reproduces the run byte for byte.
    let cfg = tmp.path().join("cfg.json");
    let v: serde_json::Value = serde_json::from_str(&printed).unwrap();
    fs::write(&cfg, serde_json::to_string(&v["config"]).unwrap()).unwrap();
    let again = berryloop(&["loop", "--config", cfg.to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(stdout(&again), printed);
}

#[test]
fn strict_flags_nonadiabatic_loops() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let args = [
        "loop", "--delta", "-0.1", "--u", "0", "--T", "2", "--no-ed", "--out", out,
    ];
    let o = berryloop(&args);
    assert!(o.status.success());
    let kinds = json_field(&o, &["warnings"]);
    assert!(kinds.to_string().contains("nonadiabatic"), "{kinds}");
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(berryloop(&strict).status.code(), Some(3));
}

#[test]
fn sweep_writes_points_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sw");
    let o = berryloop(&[
        "sweep", "--axis", "delta", "--values", "-0.9,0.9", "--u", "0", "--T", "4",
        "--format", "csv", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(stdout(&o), summary);
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows[0], "# berryloop-v1");
    assert_eq!(rows[1], "delta,phi_b_principal,max_infid_f,max_cnot,max_depth");
    assert_eq!(rows.len(), 4);
    let phase = |row: &str| row.split(',').nth(1).unwrap().parse::<f64>().unwrap();
    assert!((phase(rows[2]).abs() - PI).abs() < 1e-2);
    assert!(phase(rows[3]).abs() < 1e-2);
    for k in 0..2 {
        let dir = out.join(format!("point_{k:03}"));
        assert!(dir.join("trajectory.csv").exists());
        assert!(!dir.join("result.json").exists());
    }
}

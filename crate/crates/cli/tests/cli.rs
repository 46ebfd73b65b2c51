use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn igeo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_igeo"))
        .args(args)
        .current_dir(dir)
        .env_remove("IGEO_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

/// The number printed after `label` on the first line that contains it.
fn printed(out: &str, label: &str) -> f64 {
    let line = out.lines().find(|l| l.contains(label)).unwrap_or_else(|| panic!("no `{label}` in:\n{out}"));
    let rest = &line[line.find(label).unwrap() + label.len()..];
    rest.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn curvature_values() {
    let dir = TempDir::new().unwrap();
    let o = igeo(dir.path(), &["curvature", "--l", "2", "--r", "0.5", "--check-numeric"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((printed(&out, "scalar curvature:") + 4.0 / 1.75).abs() < 1e-12);
    assert!(printed(&out, "max Christoffel deviation:") < 1e-6);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("igeo-out/curvature.json")).unwrap()).unwrap();
    assert_eq!(json["reference_position"], serde_json::json!([0.0, 1.0, 0.0, 1.0]));

    let o = igeo(dir.path(), &["curvature", "--baseline"]);
    assert_eq!(printed(&stdout(&o), "scalar curvature:"), -1.0);
}

#[test]
fn invalid_config_exits_1_with_one_line_per_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"l": 1, "r": [1.5], "lambda": [0.5], "xi": [1.0], "taus": 3}"#);
    let o = igeo(dir.path(), &["ige", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("r[0]: 1.5 outside (0,1)"), "{err}");
    assert!(err.contains("unknown keys: taus"), "{err}");

    let cfg = write(dir.path(), "dup.json", "{\n  \"r\": [0.5],\n  \"r\": [0.6]\n}");
    let o = igeo(dir.path(), &["ige", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("duplicate key `r` at line 3"), "{}", stderr(&o));

    let o = igeo(dir.path(), &["ige", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_the_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"r": [0.5], "lambda": [0.5], "xi": [1.0], "output": {"directory": "from-file"}}"#);
    let o = igeo(dir.path(), &["curvature", "--config", &cfg, "--r", "0.3", "--output-dir", "from-flag"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((printed(&stdout(&o), "scalar curvature:") + 2.0 / (2.0 - 0.09)).abs() < 1e-12);
    assert!(dir.path().join("from-flag/curvature.json").exists());
    assert!(!dir.path().join("from-file").exists());
}

#[test]
fn output_root_environment_variable() {
    let dir = TempDir::new().unwrap();
    let root = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_igeo"))
        .args(["curvature"])
        .current_dir(dir.path())
        .env("IGEO_OUTPUT_ROOT", root.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(root.path().join("igeo-out/curvature.json").exists());
    assert!(!dir.path().join("igeo-out").exists());
}

#[test]
fn domain_error_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = igeo(dir.path(), &["ige", "--linear-grid", "--tau-start", "0", "--tau-stop", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tau = 0"), "{}", stderr(&o));
}

#[test]
fn paper_entropy_log_failure_names_block_and_tau() {
    // Block 1 has Σ ≈ 0.110, Λ₁ ≈ 0.642 and Λ₂ ≈ −2.75, so Λ₁ + Λ₂/τ < 0 at τ = 1.
    let dir = TempDir::new().unwrap();
    let o = igeo(
        dir.path(),
        &[
            "ige", "--modes", "closed", "--closed-mode", "asymptotic", "--l", "2", "--r", "0.5,0.9", "--lambda", "0.5,2",
            "--xi", "1,0.5", "--linear-grid", "--tau-start", "1", "--tau-stop", "10",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    let err = stderr(&o);
    assert!(err.contains("block 1") && err.contains("tau = 1"), "{err}");
    // The exact form can go negative too: block 0 has Ξ < 4λq, so the
    // integrand starts negative and V(1) < 0.
    let o = igeo(
        dir.path(),
        &["ige", "--modes", "closed", "--l", "2", "--r", "0.5,0.9", "--lambda", "0.5,2", "--xi", "1,0.5", "--linear-grid", "--tau-start", "1", "--tau-stop", "10"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("block 0 at tau = 1"), "{}", stderr(&o));
    let o = igeo(
        dir.path(),
        &["ige", "--modes", "closed", "--l", "2", "--r", "0.5,0.9", "--lambda", "0.5,2", "--xi", "1,0.5", "--linear-grid", "--tau-start", "10", "--tau-stop", "100"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn geodesic_modes() {
    let dir = TempDir::new().unwrap();
    let o = igeo(dir.path(), &["geodesic", "--mode", "canonical", "--output-dir", "c"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(printed(&stdout(&o), "sup gap vs closed form:") < 1e-6);
    let csv = fs::read_to_string(dir.path().join("c/geodesic.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "tau,block,chart,mu,sigma,dmu,dsigma");
    assert!(csv.lines().nth(1).unwrap().starts_with("0.0,0,canonical,"));

    let o = igeo(dir.path(), &["geodesic", "--mode", "full", "--l", "2", "--r", "0.3,0.7", "--lambda", "0.5,1", "--xi", "1,2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(printed(&stdout(&o), "squared-speed drift:") < 1e-7);

    let o = igeo(dir.path(), &["geodesic", "--mode", "analytic", "--points", "11", "--format", "gnuplot-data", "--output-dir", "g"]);
    assert!(o.status.success());
    let dat = fs::read_to_string(dir.path().join("g/geodesic_block0_sigma.dat")).unwrap();
    assert_eq!(dat.lines().count(), 12);
    assert_eq!(dat.lines().nth(1).unwrap().split(' ').count(), 2);
    assert!(!dir.path().join("g/geodesic.csv").exists());
}

#[test]
fn geodesic_initial_state_must_match_dimension() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "g.json", r#"{"geodesic": {"mode": "full", "initial": {"position": [0.0, 1.0, 0.0], "velocity": [0.1, 0.0]}}}"#);
    let o = igeo(dir.path(), &["geodesic", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("geodesic.initial.position"), "{}", stderr(&o));
}

#[test]
fn ige_both_modes_report() {
    let dir = TempDir::new().unwrap();
    let o = igeo(dir.path(), &["ige", "--modes", "both", "--format", "csv,json,gnuplot-data"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(printed(&out, "max relative closed vs quadrature gap:") < 1e-9);
    assert!((printed(&out, "fit exponent:") + 1.0).abs() < 0.01);
    assert_eq!(printed(&out, "sum lambda_k * tau ="), 0.5e6);
    let csv = fs::read_to_string(dir.path().join("igeo-out/ige.csv")).unwrap();
    assert_eq!(csv.lines().count(), 32);
    assert!(csv.lines().nth(1).unwrap().starts_with("1000.0,"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("igeo-out/ige.json")).unwrap()).unwrap();
    assert!(json["blocks"][0]["lambda1"].as_f64().unwrap() > 0.0);
    assert!(json["blocks"][0]["fit"]["exponent"].is_number());
    assert!(dir.path().join("igeo-out/ige_v_quadrature.dat").exists());

    let o = igeo(dir.path(), &["ige", "--modes", "closed", "--output-dir", "closed"]);
    let csv = fs::read_to_string(dir.path().join("closed/ige.csv")).unwrap();
    assert!(o.status.success());
    let cells: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(cells[2], "");
    assert!(!cells[1].is_empty() && !cells[3].is_empty());
}

#[test]
fn sweep_rows_order_and_determinism() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"sweep": {"r": {"range": [0.1, 0.9], "count": 9}, "lambda": [0.1, 0.5, 1.0, 1.5, 2.0], "xi": [1.0]}}"#,
    );
    for d in ["a", "b"] {
        let o = igeo(dir.path(), &["sweep", "--config", &cfg, "--output-dir", d]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a/sweep.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/sweep.csv")).unwrap());
    assert_eq!(fs::read(dir.path().join("a/sweep_manifest.json")).unwrap(), fs::read(dir.path().join("b/sweep_manifest.json")).unwrap());
    let text = String::from_utf8(a).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 45);
    assert!(rows[0].starts_with("0.1,0.1,1.0,1,"));

    // r-only sweep at λ = Ξ = 1. Λ₁(r) peaks at r ≈ 0.826 (value ≈ 0.64698),
    // so the column rises through r = 0.8 and drops at r = 0.9.
    let o = igeo(dir.path(), &["sweep", "--lambda", "1", "--xi", "1", "--output-dir", "r"]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("r/sweep.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "lambda1").unwrap();
    let l1: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(l1.len(), 9);
    assert!(l1[..8].windows(2).all(|w| w[1] > w[0]), "{l1:?}");
    assert!(l1[8] < l1[7], "{l1:?}");
    assert!((l1[7] - 0.6463582670918441).abs() < 1e-15 && (l1[8] - 0.641872274151277).abs() < 1e-15);
}

#[test]
fn sweep_cap_needs_override() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"sweep": {"r": [0.2, 0.4], "lambda": [1.0, 2.0], "max_points": 3}}"#);
    let o = igeo(dir.path(), &["sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--allow-large"));
    let o = igeo(dir.path(), &["sweep", "--config", &cfg, "--allow-large"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn validate_subset_and_unknown_suite() {
    let dir = TempDir::new().unwrap();
    let o = igeo(dir.path(), &["validate", "--suite", "eigen-reconstruction", "--suite", "saturation"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2);
    assert!(out.lines().all(|l| l.starts_with("[PASS] ")));
    let o = igeo(dir.path(), &["validate", "--suite", "bogus"]);
    assert_eq!(o.status.code(), Some(1));
    let o = igeo(dir.path(), &["validate", "--list"]);
    assert!(stdout(&o).lines().any(|l| l == "igc-equivalence"));
}

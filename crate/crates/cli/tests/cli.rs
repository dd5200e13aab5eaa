//! End-to-end tests of the `ivbound` binary: exit codes, file outputs,
//! determinism, and agreement of exported grids with the library formulas.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use ivbound_core::identified_set::{f_rho_uzeta, Correlations};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ivbound"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_continuous_csv(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut noise = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut out = String::from("outcome,treat,inst,ctrl\n");
    for _ in 0..n {
        let z = noise();
        let c = noise();
        let t = 0.7 * z + 0.2 * c + noise();
        // Exogenous errors: OLS and IV slopes both converge to beta = 1.
        let y = t + 0.1 * c + noise();
        out.push_str(&format!("{y},{t},{z},{c}\n"));
    }
    fs::write(path, out).unwrap();
}

fn write_binary_csv(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = String::from("outcome,treat,inst\n");
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let shock: f64 = StandardNormal.sample(&mut rng);
        let t = if z + shock > 0.0 { 1.0 } else { 0.0 };
        let e: f64 = StandardNormal.sample(&mut rng);
        let y = 0.8 * t + e;
        out.push_str(&format!("{y},{t},{z}\n"));
    }
    fs::write(path, out).unwrap();
}

fn config_json(data: &Path, out: &Path, treatment: &str, extra_restrictions: &str) -> String {
    format!(
        r#"{{
  "data": "{data}",
  "columns": {{"y": "outcome", "t": "treat", "z": "inst"{x}}},
  "treatment_kind": "{treatment}",
  "restrictions": {{"kappa_tilde": [0.7, 1.0], "rho_uxistar": [-0.6, 0.6]{extra_restrictions}}},
  "inference": {{"draws": 300, "seed": 5, "grid": 21}},
  "out": "{out}"
}}"#,
        data = data.display(),
        out = out.display(),
        x = if treatment == "continuous" {
            r#", "x": ["ctrl"]"#
        } else {
            ""
        },
    )
}

fn setup_continuous(dir: &Path, n: usize) -> PathBuf {
    let data = dir.join("obs.csv");
    write_continuous_csv(&data, n, 42);
    let config = dir.join("config.json");
    fs::write(
        &config,
        config_json(&data, &dir.join("results"), "continuous", ""),
    )
    .unwrap();
    config
}

fn parse_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn as_f64(v: &serde_json::Value) -> f64 {
    match v {
        serde_json::Value::Number(n) => n.as_f64().unwrap(),
        serde_json::Value::String(s) => match s.as_str() {
            "inf" => f64::INFINITY,
            "-inf" => f64::NEG_INFINITY,
            "nan" => f64::NAN,
            other => other.parse().unwrap(),
        },
        other => panic!("not a float: {other}"),
    }
}

#[test]
fn estimate_recovers_slopes_on_exogenous_data() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup_continuous(dir.path(), 100_000);
    let out = run(&["estimate", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = parse_json(&dir.path().join("results/estimate.json"));
    assert!((as_f64(&json["ols_slope"]) - 1.0).abs() < 0.02);
    assert!((as_f64(&json["iv_slope"]) - 1.0).abs() < 0.02);
    assert_eq!(json["binary"], serde_json::Value::Null);
    let table = fs::read_to_string(dir.path().join("results/estimate.txt")).unwrap();
    assert!(table.contains("OLS slope"));
}

#[test]
fn estimate_binary_reports_alpha_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("obs.csv");
    write_binary_csv(&data, 20_000, 7);
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        config_json(&data, &dir.path().join("results"), "binary", ""),
    )
    .unwrap();
    let out = run(&["estimate", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = parse_json(&dir.path().join("results/estimate.json"));
    let p = as_f64(&json["binary"]["p_hat"]);
    assert!((p - 0.5).abs() < 0.05);
    assert!(as_f64(&json["binary"]["psi_min"]) < 0.0);
    assert!(as_f64(&json["binary"]["alpha0_max"]) > 0.0);
}

#[test]
fn infer_is_deterministic_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup_continuous(dir.path(), 2000);
    let out = run(&["infer", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = dir.path().join("results");
    let first = fs::read(results.join("infer.json")).unwrap();
    let first_draws = fs::read(results.join("param_draws.csv")).unwrap();
    assert!(results.join("infer.txt").exists());

    let out = run(&["infer", config.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(first, fs::read(results.join("infer.json")).unwrap());
    assert_eq!(first_draws, fs::read(results.join("param_draws.csv")).unwrap());

    let json: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(json["set"]["draw_count"], serde_json::json!(300));
    let p_empty = as_f64(&json["set"]["p_empty"]);
    assert!((0.0..=1.0).contains(&p_empty));
    let lo = as_f64(&json["parameter"]["hpd_beta"][0]);
    let hi = as_f64(&json["parameter"]["hpd_beta"][1]);
    assert!(lo <= hi);
    // Header plus one row per kept structural draw.
    let lines = String::from_utf8(first_draws).unwrap().lines().count();
    assert_eq!(
        lines as i64 - 1,
        json["parameter"]["kept_draws"].as_i64().unwrap()
    );
}

#[test]
fn flag_overrides_beat_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup_continuous(dir.path(), 2000);
    let alt_out = dir.path().join("alt");
    let out = run(&[
        "infer",
        config.to_str().unwrap(),
        "--draws",
        "150",
        "--seed",
        "11",
        "--coverage",
        "0.8",
        "--out",
        alt_out.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = parse_json(&alt_out.join("infer.json"));
    assert_eq!(json["set"]["draw_count"], serde_json::json!(150));
    assert_eq!(json["diagnostics"]["seed"], serde_json::json!(11));
    assert!((as_f64(&json["set"]["coverage"]) - 0.8).abs() < 1e-15);
}

#[test]
fn surface_rows_satisfy_the_manifold_equation() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup_continuous(dir.path(), 2000);
    assert!(run(&["estimate", config.to_str().unwrap()]).status.success());
    assert!(run(&["surface", config.to_str().unwrap()]).status.success());
    let est = parse_json(&dir.path().join("results/estimate.json"));
    let sigma = Matrix3::from_fn(|i, j| as_f64(&est["sigma_hat"][i][j]));
    let c = Correlations::from_sigma(&sigma);
    let anchor = sigma[(0, 2)] / sigma[(1, 2)];

    let text = fs::read_to_string(dir.path().join("results/surface.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "kappa_tilde,rho_uxistar,rho_uzeta,beta"
    );
    let mut rows = 0usize;
    for line in lines {
        let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let (kappa, rho, rho_uzeta, beta) = (vals[0], vals[1], vals[2], vals[3]);
        assert!((f_rho_uzeta(&c, kappa, rho) - rho_uzeta).abs() < 1e-12);
        assert!(beta.is_finite());
        assert!((beta - anchor).abs() < 1e3);
        rows += 1;
    }
    assert_eq!(rows, 21 * 21);
}

#[test]
fn lambda_restriction_is_converted() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("obs.csv");
    write_continuous_csv(&data, 2000, 43);
    let config = dir.path().join("config.json");
    let text = config_json(&data, &dir.path().join("results"), "continuous", "")
        .replace("\"kappa_tilde\": [0.7, 1.0]", "\"lambda\": [0.8, 1.0]");
    fs::write(&config, text).unwrap();
    let out = run(&["infer", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    // Missing config file -> 2.
    let out = run(&["estimate", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Both kappa_tilde and lambda -> 2.
    let data = dir.path().join("obs.csv");
    write_continuous_csv(&data, 500, 44);
    let bad = dir.path().join("bad.json");
    let text = config_json(&data, &dir.path().join("results"), "continuous", "")
        .replace(
            "\"kappa_tilde\": [0.7, 1.0]",
            "\"kappa_tilde\": [0.7, 1.0], \"lambda\": [0.8, 1.0]",
        );
    fs::write(&bad, text).unwrap();
    let out = run(&["estimate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Missing data file -> 3.
    let no_data = dir.path().join("no_data.json");
    fs::write(
        &no_data,
        config_json(
            &dir.path().join("ghost.csv"),
            &dir.path().join("results"),
            "continuous",
            "",
        ),
    )
    .unwrap();
    let out = run(&["estimate", no_data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    // Unparseable cell -> 3.
    let corrupt = dir.path().join("corrupt.csv");
    fs::write(&corrupt, "outcome,treat,inst,ctrl\n1.0,abc,0.5,0.1\n").unwrap();
    let cfg = dir.path().join("corrupt.json");
    fs::write(
        &cfg,
        config_json(&corrupt, &dir.path().join("results"), "continuous", ""),
    )
    .unwrap();
    let out = run(&["estimate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    // Oracle failure (corrupted-L fixture) -> 4.
    let out = run(&["verify", "--corrupt-l"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn verify_report_is_reproducible() {
    let a = run(&["verify", "--seed", "3"]);
    let b = run(&["verify", "--seed", "3"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("verify: 7 checks, 0 failed"));
}

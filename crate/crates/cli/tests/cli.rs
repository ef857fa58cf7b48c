//! End-to-end tests against the built binary and the shipped scenario files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netsteer"))
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_json(args: &[&str]) -> serde_json::Value {
    let out = run_ok(args);
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn temp_path(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("netsteer-test-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn eval_bell_ghz_reports_expected_numbers() {
    let path = scenario_dir().join("bell-ghz.json");
    let v = stdout_json(&["eval", "--scenario", path.to_str().unwrap()]);
    let report = &v["report"];
    assert!((report["value"].as_f64().unwrap() - 8.0).abs() < 1e-9);
    assert_eq!(report["bound"].as_f64().unwrap(), 4.0);
    assert!(report["violated"].as_bool().unwrap());
    assert!(v["scenario_hash"].as_str().unwrap().len() == 16);
    assert!(v["toolkit_version"].is_string());
}

#[test]
fn eval_lsi_at_half_visibility() {
    // 3 * 0.5^2 = 0.75: below the bound
    let base = fs::read_to_string(scenario_dir().join("lsi-isotropic.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&base).unwrap();
    doc["sources"][0]["eta"] = serde_json::json!(0.5);
    let path = temp_path("lsi-half.json");
    fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();

    let v = stdout_json(&["eval", "--scenario", path.to_str().unwrap()]);
    let report = &v["report"];
    assert!((report["value"].as_f64().unwrap() - 0.75).abs() < 1e-9);
    assert!(!report["violated"].as_bool().unwrap());
}

#[test]
fn eval_text_format() {
    let path = scenario_dir().join("nonlinear-maxent.json");
    let out = run_ok(&[
        "eval",
        "--scenario",
        path.to_str().unwrap(),
        "--format",
        "text",
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("criterion:  nonlinear"));
    assert!(text.contains("violated:   true"));
}

#[test]
fn eval_rejects_malformed_scenario_with_exit_2() {
    let path = temp_path("malformed.json");
    fs::write(
        &path,
        r#"{"criterion": "bell", "n": 2, "sources": [{"type": "squeezed"}], "alice": ["pauli-xz"], "bob": "star"}"#,
    )
    .unwrap();
    let out = bin()
        .args(["eval", "--scenario", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scenario"), "stderr: {err}");
}

#[test]
fn eval_rejects_wrong_setting_count_with_field_name() {
    let path = temp_path("wrong-settings.json");
    fs::write(
        &path,
        r#"{"criterion": "lsi", "n": 2, "sources": [{"type": "isotropic", "eta": 0.8}], "alice": ["pauli-xz"], "bob": "sbm"}"#,
    )
    .unwrap();
    let out = bin()
        .args(["eval", "--scenario", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("alice"), "diagnostic should name the field: {err}");
}

#[test]
fn sweep_lsi_eta_crosses_threshold() {
    let path = scenario_dir().join("lsi-isotropic.json");
    let out_csv = temp_path("lsi-sweep.csv");
    run_ok(&[
        "sweep",
        "--scenario",
        path.to_str().unwrap(),
        "--param",
        "sources.*.eta",
        "--from",
        "0",
        "--to",
        "1",
        "--steps",
        "101",
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(&out_csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "param,value,bound,violated");
    assert_eq!(lines.len(), 102);
    assert!(!csv.contains('\r'), "LF line endings only");

    // the violated column flips exactly once, at the first point above 1/sqrt(3)
    let flags: Vec<bool> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(3).unwrap() == "true")
        .collect();
    let first_true = flags.iter().position(|&b| b).unwrap();
    assert_eq!(first_true, 58, "flip at eta = 0.58");
    assert!(flags[first_true..].iter().all(|&b| b));
    assert!(flags[..first_true].iter().all(|&b| !b));

    // spot-check a value: eta = 0.5 -> 0.75
    let row50: Vec<&str> = lines[51].split(',').collect();
    let value: f64 = row50[1].parse().unwrap();
    assert!((value - 0.75).abs() < 1e-10);
}

#[test]
fn sweep_star_n_gives_power_ratios() {
    let path = scenario_dir().join("bell-star.json");
    let out_csv = temp_path("star-sweep.csv");
    run_ok(&[
        "sweep",
        "--scenario",
        path.to_str().unwrap(),
        "--param",
        "n",
        "--from",
        "1",
        "--to",
        "3",
        "--steps",
        "3",
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(&out_csv).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| {
            l.split(',')
                .take(3)
                .map(|v| v.parse().unwrap())
                .collect()
        })
        .collect();
    let sqrt2 = std::f64::consts::SQRT_2;
    for (i, row) in rows.iter().enumerate() {
        let n = (i + 1) as i32;
        assert!((row[1] - (2.0 * sqrt2).powi(n)).abs() < 1e-8);
        assert!((row[1] / row[2] - sqrt2.powi(n)).abs() < 1e-8);
    }
}

#[test]
fn sweep_zero_width_matches_eval() {
    let path = scenario_dir().join("lsi-isotropic.json");
    let out_csv = temp_path("zero-width.csv");
    run_ok(&[
        "sweep",
        "--scenario",
        path.to_str().unwrap(),
        "--param",
        "sources.*.eta",
        "--from",
        "0.8",
        "--to",
        "0.8",
        "--steps",
        "1",
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(&out_csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    let value: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - 3.0 * 0.8 * 0.8).abs() < 1e-10);
}

#[test]
fn sweep_rejects_bad_path() {
    let path = scenario_dir().join("lsi-isotropic.json");
    let out = bin()
        .args([
            "sweep",
            "--scenario",
            path.to_str().unwrap(),
            "--param",
            "sources.*.visibility",
            "--from",
            "0",
            "--to",
            "1",
            "--steps",
            "3",
            "--out",
            temp_path("never.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("visibility"), "stderr: {err}");
}

#[test]
fn sample_ghz_within_three_sigma_and_reproducible() {
    let path = scenario_dir().join("bell-ghz-sampled.json");
    let out1 = run_ok(&["sample", "--scenario", path.to_str().unwrap()]);
    let out2 = run_ok(&["sample", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out1.stdout, out2.stdout, "same seed, byte-identical output");

    let v: serde_json::Value = serde_json::from_slice(&out1.stdout).unwrap();
    assert_eq!(v["seed"].as_u64().unwrap(), 42);
    assert_eq!(v["shots"].as_u64().unwrap(), 100_000);
    let value = v["value"].as_f64().unwrap();
    let stderr = v["stderr"].as_f64().unwrap();
    let exact = v["exact_value"].as_f64().unwrap();
    assert!((exact - 8.0).abs() < 1e-9);
    assert!((value - 8.0).abs() <= 3.0 * stderr);
}

#[test]
fn sample_single_shot_is_degenerate_but_valid() {
    let path = scenario_dir().join("bell-ghz.json");
    let v = stdout_json(&[
        "sample",
        "--scenario",
        path.to_str().unwrap(),
        "--shots",
        "1",
        "--seed",
        "3",
    ]);
    assert_eq!(v["shots"].as_u64().unwrap(), 1);
    assert!(v["value"].as_f64().is_some());
    assert!(v["stderr"].as_f64().is_some());
}

#[test]
fn sample_without_plan_fails() {
    let path = scenario_dir().join("bell-ghz.json");
    let out = bin()
        .args(["sample", "--scenario", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("shot"), "stderr: {err}");
}

#[test]
fn presets_listing_names_everything() {
    let out = run_ok(&["presets"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["bell-ghz", "bell-star", "nonlinear-maxent", "lsi-isotropic"] {
        assert!(text.contains(name), "missing {name}");
    }
    assert!(text.contains("expected ratio"));

    let v = stdout_json(&["presets", "--format", "json"]);
    let entries = v.as_array().unwrap();
    assert_eq!(entries.len(), 4);
    for entry in entries {
        assert!(entry["expected_ratio"].is_string());
    }
}

#[test]
fn scenario_round_trip_preserves_reported_values() {
    // parse -> serialize -> evaluate both, bitwise-identical reports
    for file in [
        "nonlinear-maxent.json",
        "lsi-isotropic.json",
        "bell-ghz.json",
        "bell-star.json",
    ] {
        let path = scenario_dir().join(file);
        let original = stdout_json(&["eval", "--scenario", path.to_str().unwrap()]);

        let text = fs::read_to_string(&path).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let reserialized = temp_path(&format!("rt-{file}"));
        fs::write(&reserialized, serde_json::to_string(&doc).unwrap()).unwrap();
        let round_trip = stdout_json(&["eval", "--scenario", reserialized.to_str().unwrap()]);

        assert_eq!(original, round_trip, "round trip changed the report for {file}");
    }
}

#[test]
fn every_shipped_preset_scenario_hits_its_expected_number() {
    let sqrt2 = std::f64::consts::SQRT_2;
    let cases: [(&str, f64, f64); 4] = [
        ("nonlinear-maxent.json", sqrt2, 1e-9),
        ("lsi-isotropic.json", 3.0, 1e-9),
        ("bell-ghz.json", 8.0, 1e-9),
        ("bell-star.json", 8.0, 1e-8),
    ];
    for (file, expected, tol) in cases {
        let path = scenario_dir().join(file);
        let v = stdout_json(&["eval", "--scenario", path.to_str().unwrap()]);
        let value = v["report"]["value"].as_f64().unwrap();
        assert!(
            (value - expected).abs() < tol,
            "{file}: value {value} expected {expected}"
        );
        assert!(v["report"]["violated"].as_bool().unwrap(), "{file}");
    }
}

#[test]
fn thread_cap_env_var_is_honored() {
    let path = scenario_dir().join("bell-ghz.json");
    let out = bin()
        .args(["eval", "--scenario", path.to_str().unwrap()])
        .env("NETSTEER_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
}

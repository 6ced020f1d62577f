//! End-to-end runs of the `homtool` binary.

use std::path::Path;
use std::process::{Command, Output};

fn homtool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homtool")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = homtool(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    homtool(args).status.code().unwrap()
}

/// Data rows of a CSV artifact with its `#` metadata and header stripped.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn dist_rows_sum_to_one_and_carry_metadata() {
    let out = ok(&["dist", "--detector", "nr", "--timing", "tr", "--bin-width", "0.7", "--gamma", "0.4"]);
    assert!(out.starts_with("# homtool dist "));
    assert!(out.contains("# config: {\"schema_version\":1"));
    assert!(out.contains("# config_sha256: "));
    let rows = rows(&out);
    let total: f64 = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12, "{total}");
    let zero = rows.iter().find(|r| r[0] == "zero_clicks").unwrap();
    assert!((zero[2].parse::<f64>().unwrap() - 0.16).abs() < 1e-15);
}

#[test]
fn perfect_dip_has_no_coincidences() {
    let out = ok(&[
        "dist", "--detector", "nr", "--timing", "tr", "--bin-width", "1", "--alpha", "1", "--delta", "0", "--gamma", "0",
    ]);
    let rows = rows(&out);
    assert!(rows.iter().any(|r| r[0] == "coincidence"));
    for r in rows.iter().filter(|r| r[0] == "coincidence") {
        assert_eq!(r[2].parse::<f64>().unwrap(), 0.0, "{r:?}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["dist", "--alpha", "1.5"]), 2);
    assert_eq!(code(&["dist", "--timing", "tr"]), 2);
    assert_eq!(code(&["fisher", "--alpha", "1", "--params", "delta,alpha"]), 3);
    assert_eq!(code(&["benchmarks"]), 5);
    assert_eq!(code(&["selftest"]), 0);

    let dir = tempfile::tempdir().unwrap();
    let zeros = dir.path().join("zeros.csv");
    ok(&["simulate", "--gamma", "1", "--n-trials", "500", "--out", path(&zeros)]);
    assert_eq!(code(&["estimate", "--gamma", "1", "--counts", path(&zeros)]), 4);
    // Counts recorded under one configuration cannot be fitted with another.
    assert_eq!(code(&["estimate", "--gamma", "0.9", "--counts", path(&zeros)]), 4);
}

#[test]
fn config_files_are_strict_and_flags_override_them() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema_version":1,"params":{"delta":0.5},"detectr":"nr"}"#).unwrap();
    assert_eq!(code(&["dist", "--config", path(&bad)]), 2);

    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"schema_version":1,"params":{"gamma":0.2},"detector":"nr"}"#).unwrap();
    let rows_file = rows(&ok(&["dist", "--config", path(&good)]));
    let zero = rows_file.iter().find(|r| r[0] == "zero_clicks").unwrap();
    assert!((zero[2].parse::<f64>().unwrap() - 0.04).abs() < 1e-15);
    let rows_flag = rows(&ok(&["dist", "--config", path(&good), "--gamma", "0.5"]));
    let zero = rows_flag.iter().find(|r| r[0] == "zero_clicks").unwrap();
    assert!((zero[2].parse::<f64>().unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn simulate_is_reproducible_and_total_loss_is_one_row() {
    let out = ok(&["simulate", "--gamma", "1", "--n-trials", "1000"]);
    let r = rows(&out);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][0], "zero_clicks");
    assert_eq!(r[0][2], "1000");

    let args = ["simulate", "--detector", "nr", "--timing", "tr", "--bin-width", "1", "--seed", "9", "--n-trials", "20000"];
    assert_eq!(ok(&args), ok(&args));
    assert!(ok(&args).contains("# seed: 9"));
}

#[test]
fn simulate_then_estimate_recovers_delay() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    let common = ["--detector", "nr", "--timing", "tr", "--bin-width", "1", "--delta", "0.6"];
    let mut sim = vec!["simulate", "--n-trials", "200000", "--seed", "3", "--out", path(&counts)];
    sim.extend(common);
    ok(&sim);
    let mut est = vec!["estimate", "--counts", path(&counts)];
    est.extend(common);
    let v = json(&ok(&est));
    let d = v["result"]["estimates"]["delta"].as_f64().unwrap();
    let var = v["result"]["crb_variance"]["delta"].as_f64().unwrap();
    assert!((d - 0.6).abs() < 5.0 * var.sqrt(), "{d} +- {}", var.sqrt());
}

#[test]
fn two_dataset_nohom_recovers_signed_sample_delay() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--protocol", "nohom", "--timing", "tr", "--bin-width", "0.5", "--adjustable-delay", "0.9"];
    let mut files = Vec::new();
    for (name, sample, seed) in [("s.csv", "-1.3", "4"), ("r.csv", "0", "5")] {
        let f = dir.path().join(name);
        let mut args = vec!["simulate", "--n-trials", "200000", "--sample-delay", sample, "--seed", seed, "--out", path(&f)];
        args.extend(common);
        ok(&args);
        files.push(f);
    }
    let mut args = vec!["estimate", "--counts", path(&files[0]), "--reference", path(&files[1])];
    args.extend(["--protocol", "nohom", "--timing", "tr", "--bin-width", "0.5"]);
    let v = json(&ok(&args));
    let d = v["sample_delay"]["estimate"].as_f64().unwrap();
    let sd = v["sample_delay"]["crb_variance"].as_f64().unwrap().sqrt();
    assert!((d + 1.3).abs() < 5.0 * sd, "{d} +- {sd}");
}

#[test]
fn fisher_reports_rank_and_limits() {
    let v = json(&ok(&["fisher", "--params", "delta,alpha,sigma,gamma"]));
    assert_eq!(v["rank"], 2);
    assert_eq!(v["singular"], true);
    assert_eq!(v["qfi"].as_f64().unwrap(), 4.0);
    assert!((v["qfi_two_photon"].as_f64().unwrap() - 1.44).abs() < 1e-15);

    let rel: Vec<f64> = ["0.1", "0.4", "0.7"]
        .iter()
        .map(|g| {
            let v = json(&ok(&[
                "fisher", "--detector", "nr", "--timing", "tr", "--bin-width", "1", "--optimal-delta", "--gamma", g,
            ]));
            v["relative_information"].as_f64().unwrap()
        })
        .collect();
    assert!(rel.iter().all(|r| (r - rel[0]).abs() < 1e-6), "{rel:?}");
}

#[test]
fn scan_is_symmetric_and_nohom_is_periodic() {
    let out = ok(&[
        "scan", "--axis", "delta", "--start", "-1", "--stop", "1", "--steps", "9", "--protocols", "HOM,NRTR-HOM,no-HOM",
        "--bin-width", "1",
    ]);
    let rows = rows(&out);
    let info = |proto: &str, d: f64| -> f64 {
        rows.iter()
            .find(|r| r[1] == proto && (r[0].parse::<f64>().unwrap() - d).abs() < 1e-12)
            .map(|r| r[3].parse().unwrap())
            .unwrap()
    };
    for proto in ["HOM", "NRTR-HOM", "no-HOM"] {
        for d in [0.25, 0.5, 0.75, 1.0] {
            let (a, b) = (info(proto, d), info(proto, -d));
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-12), "{proto} at +-{d}: {a} vs {b}");
        }
    }
    let (a, b) = (info("no-HOM", -0.75), info("no-HOM", 0.25));
    assert!((a - b).abs() < 1e-8, "no-HOM period: {a} vs {b}");
}

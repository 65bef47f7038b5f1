use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ransom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ransom")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn missing_input_is_a_domain_error_naming_the_path() {
    let out = ransom(&["fit", "--input", "missing.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("missing.csv"));
    assert_eq!(err["path"], "missing.csv");
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(ransom(&["optimize", "--cost", "0"]).status.code(), Some(2));
    assert_eq!(ransom(&["optimize", "--poly", "paper", "--cost", "0", "--bogus"]).status.code(), Some(2));
    assert_eq!(ransom(&["elasticity", "--p1", "abc", "--q1", "0.4", "--p2", "1", "--q2", "1"]).status.code(), Some(2));
    assert_eq!(ransom(&["learn", "--demand", "paper", "--start", "300", "--step", "50"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one() {
    let out = ransom(&["bargain", "rubinstein", "--value", "100", "--da", "1.5", "--db", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ransom(&["elasticity", "--p1", "300", "--q1", "0.4", "--p2", "300", "--q2", "0.3"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "domain");
}

#[test]
fn help_lists_units() {
    let help = String::from_utf8(ransom(&["optimize", "--help"]).stdout).unwrap();
    for flag in ["--poly", "--cost", "--fixed-cost", "--population", "--price", "--timestamp"] {
        assert!(help.contains(flag), "{flag} missing");
    }
    assert!(help.contains("GBP"));
    let help = String::from_utf8(ransom(&["bargain", "rubinstein", "--help"]).stdout).unwrap();
    assert!(help.contains("per period"));
}

#[test]
fn timestamp_is_opt_in() {
    let plain =
        json(&ransom(&["bargain", "rubinstein", "--value", "1000", "--cost", "10", "--da", "0.9", "--db", "0.5"]));
    assert_eq!(plain.as_object().unwrap().len(), 1);
    assert_eq!(plain["rubinstein_price"], 910.0);
    let stamped = json(&ransom(&["--timestamp", "bargain", "rubinstein", "--value", "1000", "--da", "0", "--db", "0"]));
    assert!(stamped["timestamp"].as_u64().unwrap() > 0);
    assert_eq!(stamped["rubinstein_price"], 1000.0);
}

#[test]
fn fit_output_feeds_optimize() {
    let dir = TempDir::new().unwrap();
    let rows: String = (0..=20)
        .map(|k| {
            let q = k as f64 / 20.0;
            format!("{q},{}\n", 1000.0 - 800.0 * q)
        })
        .collect();
    let points = write(&dir, "points.csv", &format!("quantity,price\n{rows}"));
    let fitted = ransom(&["fit", "--input", &points, "--degree", "1"]);
    let report = json(&fitted);
    let c = report["coefficients"].as_array().unwrap();
    assert!((c[0].as_f64().unwrap() - 1000.0).abs() < 1e-9);
    assert!((c[1].as_f64().unwrap() + 800.0).abs() < 1e-9);
    assert_eq!(report["input_sha256"].as_str().unwrap().len(), 64);

    let poly = write(&dir, "poly.json", std::str::from_utf8(&fitted.stdout).unwrap());
    let best =
        json(&ransom(&["optimize", "--poly", &poly, "--cost", "200", "--population", "100", "--fixed-cost", "50"]));
    // linear demand: Q* = (a - c) / 2b
    assert!((best["paying_fraction"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((best["price"].as_f64().unwrap() - 600.0).abs() < 1e-6);
    assert!((best["total_profit"].as_f64().unwrap() - (200.0 * 100.0 - 50.0)).abs() < 1e-6);
    assert!(best["poly_sha256"].is_string());
}

#[test]
fn valuations_support_grid_fitted_fixed_and_perfect() {
    let dir = TempDir::new().unwrap();
    let vals = write(&dir, "v.csv", "valuation\n100\n200\n300\n400\n");
    let grid = json(&ransom(&["optimize", "--valuations", &vals, "--cost", "0"]));
    assert_eq!(grid["method"], "grid");
    assert!(grid["price"] == 200.0 || grid["price"] == 300.0);
    let fixed = json(&ransom(&["optimize", "--valuations", &vals, "--cost", "0", "--price", "250"]));
    assert_eq!(fixed["paying_fraction"], 0.5);
    assert_eq!(fixed["profit_per_victim"], 125.0);
    let perfect = json(&ransom(&["optimize", "--valuations", &vals, "--cost", "0", "--perfect"]));
    assert_eq!(perfect["revenue"], 1000.0);
    let vals = write(
        &dir,
        "many.csv",
        &format!("valuation\n{}", (1..=60).map(|k| format!("{}\n", 3000 - 50 * k)).collect::<String>()),
    );
    let fitted = json(&ransom(&["optimize", "--valuations", &vals, "--cost", "0", "--degree", "3"]));
    assert_eq!(fitted["method"], "fitted_polynomial");
}

#[test]
fn segments_file_resolves_relative_sources() {
    let dir = TempDir::new().unwrap();
    write(&dir, "large.csv", "valuation\n900\n1000\n1100\n");
    let config = write(
        &dir,
        "segments.toml",
        "[[segment]]\nlabel = \"large-files\"\nshare = 0.25\nvaluations = \"large.csv\"\n\n\
         [[segment]]\nlabel = \"small-files\"\nshare = 0.75\ncoefficients = [300.0, -300.0]\n",
    );
    let out = json(&ransom(&["optimize", "--segments", &config, "--cost", "0", "--population", "400"]));
    let segs = out["segments"].as_array().unwrap();
    assert_eq!(segs[0]["label"], "large-files");
    assert!(segs[0]["price"].as_f64().unwrap() > segs[1]["price"].as_f64().unwrap());
    assert_eq!(out["segment_sources_sha256"].as_array().unwrap().len(), 1);

    let bad = write(&dir, "bad.toml", "[[segment]]\nlabel = \"x\"\nshare = 1.0\n");
    assert_eq!(ransom(&["optimize", "--segments", &bad, "--cost", "0"]).status.code(), Some(1));
}

#[test]
fn survey_commands_report_digests() {
    let dir = TempDir::new().unwrap();
    let csv = write(
        &dir,
        "survey.csv",
        "id,form,wtp,wta,gender,age\n1,A,10,30,female,30\n2,B,20,50,male,40\n3,A,30,40,,\n4,B,15,60,other,25\n",
    );
    let summary = json(&ransom(&["survey", "summarize", "--input", &csv]));
    assert_eq!(summary["mean_wtp"], 18.75);
    assert_eq!(summary["mean_wta"], 45.0);
    assert_eq!(summary["input_sha256"].as_str().unwrap().len(), 64);
    let test = json(&ransom(&["survey", "ranksum", "--input", &csv]));
    assert_eq!(test["wtp"]["method"], "exact");
    assert!(test["wta"]["p_value"].as_f64().unwrap() <= 1.0);

    let bad = write(&dir, "bad.csv", "id,form,wtp,wta,gender,age\n1,C,10,30,,\n");
    let out = ransom(&["survey", "summarize", "--input", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown form C at row 1"));
}

#[test]
fn coase_compares_regimes() {
    let dir = TempDir::new().unwrap();
    let vals = write(&dir, "v.csv", "valuation\n100\n350\n700\n1000\n");
    let out = json(&ransom(&[
        "bargain",
        "coase",
        "--values",
        &vals,
        "--path",
        "900,600,300",
        "--commit",
        "700",
        "--db",
        "1",
    ]));
    assert_eq!(out["commitment_profit"], 1400.0);
    assert_eq!(out["declining_profit"], 900.0);
    assert!(out["values_sha256"].is_string());
}

#[test]
fn ultimatum_respects_threshold() {
    let out = json(&ransom(&["bargain", "ultimatum", "--value", "1000", "--threshold", "0.6", "--offer", "700"]));
    assert_eq!(out["accepted"], false);
    let out = json(&ransom(&["bargain", "ultimatum", "--value", "1000", "--threshold", "0.6", "--cost", "10"]));
    assert_eq!(out["offer"], 600.0);
    assert_eq!(out["expected_profit"], 590.0);
}

#[test]
fn learn_is_reproducible_per_seed() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    let args = |seed: &'static str| {
        vec!["learn", "--demand", "paper", "--start", "300", "--step", "50", "--seed", seed, "--sample-size", "500"]
    };
    let a = ransom(&args("3"));
    let b = ransom(&args("3"));
    let c = ransom(&args("4"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("iteration,price,fraction,eta,direction,step\n"));

    let mut with_report = args("3");
    with_report.extend(["--report", report.to_str().unwrap()]);
    assert!(ransom(&with_report).status.success());
    let summary: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(summary["seed"], 3);
    assert!(summary["final_price"].as_f64().unwrap() > 0.0);
}

#[test]
fn learn_accepts_valuation_files() {
    let dir = TempDir::new().unwrap();
    let vals =
        write(&dir, "v.csv", &format!("valuation\n{}", (1..=100).map(|k| format!("{}\n", 10 * k)).collect::<String>()));
    let out = ransom(&["learn", "--demand", &vals, "--start", "100", "--step", "40", "--seed", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().lines().count() > 2);
}

#[test]
fn simulate_writes_lines_and_summary() {
    let dir = TempDir::new().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/segmented.toml");
    let lines = dir.path().join("runs.jsonl");
    let summary = dir.path().join("summary.csv");
    let out = ransom(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "5",
        "--threads",
        "2",
        "--output",
        lines.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&lines).unwrap();
    let runs: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(runs.len(), 4);
    let digest = runs[0]["config_sha256"].as_str().unwrap();
    assert!(runs.iter().all(|r| r["config_sha256"] == digest));
    assert_eq!(runs[2]["seed"], 7);
    let csv = fs::read_to_string(&summary).unwrap();
    assert!(csv.starts_with("backup_rate,refusal_rate,mean_price,mean_profit,mean_payers\n"));
    assert_eq!(csv.lines().count(), 2);

    let single = ransom(&["simulate", "--config", config.to_str().unwrap(), "--seed", "5", "--threads", "1"]);
    assert_eq!(single.stdout, text.as_bytes());
}

#[test]
fn simulate_rejects_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "bad.toml",
        "[population]\nsize = 10\nvaluation = { kind = \"lognormal\", meanlog = 1.0, sdlog = 1.0 }\n\
         [costs]\nmarginal_cost = 0.0\nfixed_cost = 0.0\n[strategy]\nkind = \"uniform\"\nprice_typo = 3\n",
    );
    let out = ransom(&["simulate", "--config", &config, "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "input");
}

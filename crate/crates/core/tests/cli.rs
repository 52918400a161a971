use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anderson-certify"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn check_criterion_exit_codes() {
    let base = ["check-criterion", "--region", "sites:0", "--energy", "0", "--n-samples", "200"];

    let strong = [&base[..], &["--lambda", "1000", "--constants-source", "unit test"]].concat();
    let out = cli(&strong);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verdict"], "certified");

    let unsourced = [&base[..], &["--lambda", "1000"]].concat();
    let out = cli(&unsourced);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("constants-source"));

    let weak = [&base[..], &["--lambda", "0.5", "--constants-source", "unit test"]].concat();
    let out = cli(&weak);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["verdict"], "not_certified");
}

#[test]
fn single_site_is_analytic() {
    let out = cli(&[
        "check-criterion",
        "--theorem",
        "single_site",
        "--lambda",
        "100",
        "--s",
        "0.5",
        "--Cs",
        "0.5",
    ]);
    let v = json(&out);
    assert_eq!(v["rigor"], "analytic");
    let expect = 2.0 * 3.0 * 0.5 / 10.0 * 2f64.sqrt() / (0.5 * 10.0);
    assert!((v["lhs"].as_f64().unwrap() - expect).abs() < 1e-12);
}

#[test]
fn all_subsets_reports_subset_count() {
    let out = cli(&[
        "check-criterion",
        "--theorem",
        "theorem2",
        "--region",
        "box:d=1,L=1",
        "--lambda",
        "50",
        "--n-samples",
        "100",
        "--subsets",
        "exhaustive",
    ]);
    let v = json(&out);
    assert_eq!(v["subsets_evaluated"], 4);
    assert_eq!(v["rigor"], "full_subset_max");
}

#[test]
fn estimate_moment_prints_estimate() {
    let out = cli(&[
        "estimate-moment",
        "--region",
        "box:d=2,L=1",
        "--x",
        "0,0",
        "--y",
        "1,1",
        "--lambda",
        "5",
        "--n-samples",
        "100",
        "--eta",
        "0.1",
    ]);
    assert!(out.status.success());
    let v = json(&out);
    assert!(v["ci_low"].as_f64().unwrap() <= v["value"].as_f64().unwrap());
    assert_eq!(v["n_samples"], 100);
}

#[test]
fn bad_input_exits_with_one() {
    let out = cli(&["estimate-moment", "--region", "box:d=1,L=1", "--x", "0,0"]);
    assert_eq!(out.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[moments]\nn_samples = 10\n").unwrap();
    let out = cli(&["scan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_samples"));
}

fn write_scan_config(dir: &Path, grid: &str) -> String {
    let body = format!(
        "[moments]\nn_samples = 100\nn_blocks = 10\n[scan]\n{grid}\n[output]\ncsv = \"{0}/t.csv\"\njson = \"{0}/t.json\"\ncheckpoint = \"{0}/t.ckpt\"\n",
        dir.display()
    );
    let path = dir.join("scan.toml");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn scan_writes_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scan_config(dir.path(), "lambda = [20.0, 200.0]\nenergy = [0.0]\ns = [0.5]\nL = [1]");
    let out = cli(&["scan", "--config", &cfg]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "lambda,E,s,L,theorem,lhs,ci_low,ci_high,verdict,rigor,seed");
    assert_eq!(csv.lines().count(), 3);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
    assert_eq!(summary["n_cells"], 2);
    assert_eq!(summary["complete"], true);
    assert_eq!(summary["config"]["scan"]["lambda"][1], 200.0);
    assert!(summary["code_version"].is_string());
}

#[test]
fn scan_output_ignores_worker_count() {
    let grid = "lambda = [5.0, 50.0]\nenergy = [0.0, 1.0]\ns = [0.5]\nL = [1]";
    let tables: Vec<String> = ["1", "3"]
        .iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = write_scan_config(dir.path(), grid);
            let status = Command::new(env!("CARGO_BIN_EXE_anderson-certify"))
                .args(["scan", "--config", &cfg])
                .env("ANDERSON_CERTIFY_THREADS", threads)
                .output()
                .unwrap()
                .status;
            assert!(status.success());
            std::fs::read_to_string(dir.path().join("t.csv")).unwrap()
        })
        .collect();
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn fit_decay_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    let mut text = String::from("distance,moment,ci_low,ci_high\n");
    for r in 1..=8 {
        let v = 2.0 * (-0.3 * r as f64).exp();
        text.push_str(&format!("{r},{v},{},{}\n", 0.95 * v, 1.05 * v));
    }
    std::fs::write(&path, text).unwrap();
    let out = cli(&["fit-decay", "--input", path.to_str().unwrap()]);
    let v = json(&out);
    assert!((v["mu"].as_f64().unwrap() - 0.3).abs() < 1e-10);
    assert!((v["a"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(v["model"], "exponential");
}

#[test]
fn fit_decay_sampled() {
    let out = cli(&["fit-decay", "--lambda", "20", "--L", "8", "--n-samples", "200"]);
    let v = json(&out);
    assert!(v["mu"].as_f64().unwrap() > 0.0);
    assert_eq!(v["ci_method"], "block_bootstrap");
}

#[test]
fn spectra_reports_gap_ratio_and_probes() {
    let dir = tempfile::tempdir().unwrap();
    let eig_path = dir.path().join("eig.csv");
    let out = cli(&[
        "spectra",
        "--eigenvalues-out",
        eig_path.to_str().unwrap(),
        "--lambda",
        "10",
        "--L",
        "40",
        "--n-samples",
        "100",
        "--dos-energy",
        "0",
        "--lifschitz-delta",
        "0.5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let r = v["gap_statistics"]["mean_gap_ratio"].as_f64().unwrap();
    assert!(r > 0.3 && r < 0.5);
    assert!(v["dos"]["estimate"]["probability"].is_number());
    assert!(v["lifschitz"]["e0"].is_number());
    let rows = std::fs::read_to_string(&eig_path).unwrap().lines().count();
    assert_eq!(rows, 1 + 100 * 81);
}

#[test]
fn test_powerlaw_d1_threshold_is_b() {
    let out = cli(&[
        "test-powerlaw",
        "--lambda",
        "30",
        "--L",
        "6",
        "--B",
        "0.25",
        "--n-samples",
        "100",
    ]);
    let v = json(&out);
    assert_eq!(v["threshold"], 0.25);
    assert_eq!(v["exponent"], 0);
    let out = cli(&["test-powerlaw", "--L", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn scan_eta_needs_zero() {
    let args = ["scan-eta", "--region", "box:d=1,L=4", "--y", "3", "--lambda", "30", "--n-samples", "100"];
    let out = cli(&args);
    let v = json(&out);
    assert_eq!(v["points"].as_array().unwrap().len(), 4);
    let out = cli(&[&args[..], &["--eta-grid", "0.5,1"]].concat());
    assert_eq!(out.status.code(), Some(1));
}

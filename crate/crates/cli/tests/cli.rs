use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use clustertail::Model;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cfg(name: &str) -> PathBuf {
    configs().join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clustertail"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn validate_exit_codes() {
    assert_eq!(code(&run(&["validate", path(&cfg("r2.json"))])), 0);
    assert_eq!(code(&run(&["validate", path(&cfg("tube.json"))])), 0);
    let out = run(&["validate", path(&cfg("supercritical.json"))]);
    assert_eq!(code(&out), 2);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn malformed_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(cfg("r2.json")).unwrap();
    let bad = dir.path().join("truncated.json");
    fs::write(&bad, &text[..text.len() / 2]).unwrap();
    assert_eq!(code(&run(&["validate", path(&bad)])), 3);
    assert_eq!(code(&run(&["mean", path(&dir.path().join("missing.json"))])), 3);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["mean"])), 1);
    let out = run(&[
        "prob",
        path(&cfg("r2.json")),
        path(&cfg("one_jump.json")),
        "--n",
        "8,16",
        "--samples",
        "1000",
    ]);
    assert_eq!(code(&out), 1);
    let out = run(&["rate", path(&cfg("r2.json")), "--set", "3", "--n", "10"]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn supercritical_model_exits_2() {
    assert_eq!(code(&run(&["mean", path(&cfg("supercritical.json"))])), 2);
}

#[test]
fn geometry_failures_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("miss.json");
    fs::write(&set, r#"{"boxes": [{"lo": [0.0, 5.0], "hi": [0.001, 6.0]}]}"#).unwrap();
    assert_eq!(code(&run(&["ja", path(&cfg("r2.json")), path(&set)])), 4);

    // alpha*(1) - 1 + alpha*(2) - 1 = alpha*(3) - 1, so {1,2} and {3} tie
    let alphas = [1.5, 1.7, 2.2];
    let offspring: Vec<Vec<Value>> = (0..3)
        .map(|l| {
            alphas
                .iter()
                .map(|a| json!({"family": "zeta_tail", "alpha": a + 0.4 * l as f64, "mean": 0.2}))
                .collect()
        })
        .collect();
    let config = json!({"d": 3, "offspring": offspring});
    let model = Model::from_json_str(&config.to_string()).unwrap();
    let (s1, s2, s3) = (model.expected_cluster(0), model.expected_cluster(1), model.expected_cluster(2));
    let around = |c: Vec<f64>| json!({"lo": c.iter().map(|v| v - 1e-3).collect::<Vec<_>>(), "hi": c.iter().map(|v| v + 1e-3).collect::<Vec<_>>()});
    let pair: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + b).collect();
    let set_json = json!({"boxes": [around(s3), around(pair)]});
    let model_path = dir.path().join("tie.json");
    let set_path = dir.path().join("tie_set.json");
    fs::write(&model_path, config.to_string()).unwrap();
    fs::write(&set_path, set_json.to_string()).unwrap();
    assert_eq!(code(&run(&["validate", path(&model_path)])), 0);
    let out = run(&["ja", path(&model_path), path(&set_path)]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not unique"));
}

#[test]
fn ja_reports_the_cheapest_cone() {
    let out = run(&["ja", path(&cfg("r2.json")), path(&cfg("one_jump.json"))]);
    assert_eq!(code(&out), 0);
    let sol: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(sol["jset"], json!([0]));
    assert!((sol["alpha"].as_f64().unwrap() - 1.6).abs() < 1e-12);
    assert_eq!(sol["bounded_away"]["bounded_away"], true);
    assert!(String::from_utf8_lossy(&out.stderr).contains("J(A) = {1}"));

    let out = run(&["ja", path(&cfg("r2.json")), path(&cfg("two_jumps.json"))]);
    assert_eq!(code(&out), 0);
    let sol: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(sol["jset"], json!([0, 1]));
}

#[test]
fn rate_matches_library() {
    let out = run(&["rate", path(&cfg("r2.json")), "--set", "1,2", "--n", "10,100"]);
    assert_eq!(code(&out), 0);
    let model = Model::from_json_str(&fs::read_to_string(cfg("r2.json")).unwrap()).unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,lambda,alpha"));
    for (line, n) in lines.zip([10.0, 100.0]) {
        let fields: Vec<&str> = line.split(',').collect();
        let lambda: f64 = fields[1].parse().unwrap();
        let expect = model.rate_lambda(clustertail::DimSet::full(2), n).unwrap();
        assert_eq!(lambda, expect);
        assert!((fields[2].parse::<f64>().unwrap() - 2.8).abs() < 1e-12);
    }
}

#[test]
fn measure_estimates_the_constant() {
    let out = run(&[
        "measure",
        path(&cfg("r2.json")),
        path(&cfg("one_jump.json")),
        "--samples",
        "2e5",
    ]);
    assert_eq!(code(&out), 0);
    let m: Value = serde_json::from_slice(&out.stdout).unwrap();
    let (c, se) = (m["total_i"].as_f64().unwrap(), m["total_se"].as_f64().unwrap());
    assert!(se > 0.0);
    assert!((c - 2.8013).abs() < 4.0 * se + 0.01, "C = {c} +- {se}");
    assert_eq!(m["per_type"].as_array().unwrap().len(), 1);
}

fn prob_artifacts(threads: &str, dir: &Path) -> (Vec<u8>, Vec<u8>, Value) {
    let csv = dir.join("sweep.csv");
    let svg = dir.join("sweep.svg");
    let out = run(&[
        "prob",
        path(&cfg("r2.json")),
        path(&cfg("one_jump.json")),
        "--n",
        "4,8,16",
        "--samples",
        "20000",
        "--seed",
        "7",
        "--threads",
        threads,
        "--out",
        path(&csv),
        "--plot",
        path(&svg),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value = serde_json::from_slice(&fs::read(dir.join("sweep.csv.manifest.json")).unwrap()).unwrap();
    (fs::read(csv).unwrap(), fs::read(svg).unwrap(), manifest)
}

#[test]
fn artifacts_do_not_depend_on_threads() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (csv1, svg1, m1) = prob_artifacts("1", a.path());
    let (csv2, svg2, m2) = prob_artifacts("2", b.path());
    assert_eq!(csv1, csv2);
    assert_eq!(svg1, svg2);
    assert_eq!(m1["threads"], 1);
    assert_eq!(m2["threads"], 2);
    let text = String::from_utf8(csv1).unwrap();
    assert!(text.starts_with("experiment,root,n,samples,hits,censored,p_hat,se,lambda,ratio\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn manifest_records_input_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, manifest) = prob_artifacts("1", dir.path());
    let config_hash = hex(&Sha256::digest(fs::read(cfg("r2.json")).unwrap()));
    let set_hash = hex(&Sha256::digest(fs::read(cfg("one_jump.json")).unwrap()));
    assert_eq!(manifest["config"]["sha256"], config_hash);
    assert_eq!(manifest["set_file"]["sha256"], set_hash);
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["command"], "prob");
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_is_reproducible() {
    let config = cfg("r2.json");
    let args = ["simulate", path(&config), "--samples", "50", "--seed", "3"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("root,sample_index,censored,S_1,S_2\n"));
    assert_eq!(text.lines().count(), 51);
    for line in text.lines().skip(1) {
        let f: Vec<u64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(f[0], 0);
        assert!(f[3] >= 1, "the root counts towards its own type");
    }
}

#[test]
fn verify_identities_suite() {
    let out = run(&[
        "verify",
        path(&cfg("r2.json")),
        "--suite",
        "identities",
        "--m",
        "5,20",
        "--samples",
        "50000",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = v["identities"]["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["z"].as_f64().unwrap().is_finite()));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn taut(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taut"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn gen_writes_three_rows_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = taut(&["gen", "--horizon", "1", "--dt", "0.5", "--seed", "42"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("path.csv");
    let r = rows(&csv);
    assert_eq!(r.len(), 3);
    assert_eq!(r[0][1].parse::<f64>().unwrap(), 0.0);
    let meta = read_json(&dir.path().join("path.csv.meta.json"));
    assert_eq!(meta["command"], "gen");
    assert_eq!(meta["seed"], 42);
    assert_eq!(meta["config"]["dt"], 0.5);
    assert!(meta["version"].is_string());
    assert!(meta["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn solve_sawtooth_gives_zero_string() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("sawtooth.csv");
    let out = taut(&["solve", "--input", input.to_str().unwrap(), "--h", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("string.csv")).unwrap();
    assert!(text.starts_with("t,w,string,lower,upper,knot_side\n"));
    for row in rows(&dir.path().join("string.csv")) {
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
        assert!(["U", "L", "-"].contains(&row[5].as_str()));
    }
}

#[test]
fn decompose_and_verify_from_generated_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = taut(&["gen", "--horizon", "30", "--dt", "0.001", "--seed", "3"], dir.path());
    assert!(out.status.success());
    let path = dir.path().join("path.csv");
    let out = taut(&["decompose", "--input", path.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("decomposition.csv")).unwrap();
    assert!(text.starts_with("n,t_n,tbar_n\n0,"));

    let out = taut(&["verify-decomposition", "--input", path.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("theorem_report.json"));
    assert_eq!(report["status"], "checked");
    assert_eq!(report["pass"], true);
}

#[test]
fn verification_commands_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = taut(&["verify-invariance", "--seed", "4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&dir.path().join("invariance_report.json"))["pass"], true);

    let out = taut(&["oracle-check", "--instances", "20", "--seed", "4"], dir.path());
    assert!(out.status.success());
    let report = read_json(&dir.path().join("oracle_report.json"));
    assert_eq!(report["instances"].as_array().unwrap().len(), 20);
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // Oracle minimizers agree to about 1e-15 here, above this tolerance.
    let out = taut(&["verify-invariance", "--seed", "4", "--tolerance", "1e-17"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(taut(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(taut(&["gen", "--dt", "-1"], dir.path()).status.code(), Some(2));
    assert_eq!(taut(&["solve"], dir.path()).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"h\": ").unwrap();
    assert_eq!(taut(&["gen", "--config", bad.to_str().unwrap()], dir.path()).status.code(), Some(2));
    std::fs::write(&bad, "{\"unknown\": 1}").unwrap();
    assert_eq!(taut(&["gen", "--config", bad.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn config_document_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"T": 2.0, "dt": 0.5, "seed": 1}"#).unwrap();
    let out = taut(&["gen", "--config", cfg.to_str().unwrap(), "--seed", "9"], dir.path());
    assert!(out.status.success());
    let meta = read_json(&dir.path().join("path.csv.meta.json"));
    assert_eq!(meta["seed"], 9);
    assert_eq!(meta["config"]["horizon"], 2.0);
    assert_eq!(rows(&dir.path().join("path.csv")).len(), 5);
}

#[test]
fn estimate_c_writes_samples_report_and_warning() {
    let dir = tempfile::tempdir().unwrap();
    let out = taut(
        &["estimate-c", "--n-blocks", "200", "--dt", "0.001", "--penalty", "sqrt1p", "--seed", "5"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert!(text.starts_with("i,tau,energy_quadratic,energy_sqrt1p\n"));
    assert_eq!(text.lines().count(), 201);
    let report = read_json(&dir.path().join("estimate_report.json"));
    assert_eq!(report.as_array().unwrap().len(), 2);
    assert!(report[0]["c_hat"].as_f64().unwrap() > 0.0);
    let meta = read_json(&dir.path().join("samples.csv.meta.json"));
    assert_eq!(meta["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    // The sidecar records the output directory, so both runs share one.
    let dir = tempfile::tempdir().unwrap();
    let args = ["clt", "--horizon", "20", "--replicates", "60", "--calibration-blocks", "500", "--seed", "8"];
    let names = ["clt_statistics.csv", "clt_statistics.csv.meta.json", "clt_report.json"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let out = taut(&args, dir.path());
        assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
        runs.push(names.map(|n| std::fs::read(dir.path().join(n)).unwrap()));
    }
    for (k, name) in names.iter().enumerate() {
        assert!(runs[0][k] == runs[1][k], "{name}");
    }
}

#[test]
fn anscombe_default_and_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let out = taut(&["anscombe", "--horizon", "500", "--replicates", "200", "--seed", "2"], dir.path());
    assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
    let report = read_json(&dir.path().join("anscombe_report.json"));
    assert_eq!(report["sigma_bar_sq"], 26.0);

    let cfg = dir.path().join("degenerate.json");
    std::fs::write(
        &cfg,
        r#"{"pair_law": {"kind": "linear_correlated", "tau": {"law": "exponential", "mean": 1.0}, "mean": 1.0, "sd": 1.0, "rho": 1.0}}"#,
    )
    .unwrap();
    let out = taut(&["anscombe", "--config", cfg.to_str().unwrap(), "--replicates", "10"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}

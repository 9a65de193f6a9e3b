use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jte_core::pipeline::ToleranceReport;
use jte_core::report::{parse_tsv, TsvDocument};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn jte(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jte"))
        .args(args)
        .env("JTE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn shipped(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("case.json");
    let text = format!(
        r#"{{
            "schema": "jte/1",
            "robot": {{ "kind": "planar", "link_lengths": [1.0, 1.0] }},
            "reference": ["pi/3", "pi/6"],
            "constraints": [{{ "name": "x-wall", "normal": [1, 0], "offset": 1.456 }}]
            {extra}
        }}"#
    );
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn clean_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#", "verification": { "lower_bound_check": false, "samples": 2000 }"#);
    let out = jte(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn model_breach_warning_exits_two() {
    let out = jte(&["solve", "--config", &shipped("planar2_xwall.json")]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("model exceeds the true clearance"));
}

#[test]
fn no_certificate_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#", "solver": { "max_iter": 1 }, "verification": { "samples": 0, "oracle": false }"#);
    let out = jte(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("deg.json");
    std::fs::write(
        &path,
        r#"{ "schema": "jte/1", "robot": { "kind": "planar", "link_lengths": [1, 1] },
             "reference": ["60deg", "30deg"],
             "constraints": [{ "name": "x", "normal": [1, 0], "offset": 1.456 }] }"#,
    )
    .unwrap();
    let out = jte(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("reference[0]") && err.contains("reference[1]"), "{err}");
}

#[test]
fn reports_are_byte_identical_without_timing() {
    let cfg = shipped("planar2_all.json");
    let args = ["solve", "--config", &cfg, "--format", "json-doc", "--omit-timing"];
    let a = jte(&args);
    let b = jte(&args);
    assert_eq!(a.stdout, b.stdout);
    let report: ToleranceReport = serde_json::from_slice(&a.stdout).unwrap();
    assert!(report.seconds.is_none());
    assert_eq!(report.constraints.len(), 3);
}

#[test]
fn tsv_matches_json_report() {
    let cfg = shipped("planar2_general.json");
    let json = jte(&["solve", "--config", &cfg, "--format", "json-doc", "--omit-timing"]);
    let tsv = jte(&["solve", "--config", &cfg, "--format", "tsv", "--omit-timing"]);
    let report: ToleranceReport = serde_json::from_slice(&json.stdout).unwrap();
    let parsed = parse_tsv(&String::from_utf8(tsv.stdout).unwrap()).unwrap();
    assert_eq!(parsed, TsvDocument::from(&report));
}

#[test]
fn trace_follows_pipeline_order() {
    let out = jte(&["solve", "--config", &shipped("planar2_xwall.json"), "--trace", "--omit-timing"]);
    let err = String::from_utf8(out.stderr).unwrap();
    let stages = [
        "lower_bound_poly",
        "build_refute_generators",
        "enumerate_cone_terms",
        "assemble_p0",
        "build_gram",
        "prune",
        "solve_nlp",
        "certify_with_backoff",
        "sample_check",
        "check_lower_bound",
        "oracle_lambda",
        "combine_constraints",
    ];
    let mut pos = 0;
    for s in stages {
        let found = err[pos..].find(s).unwrap_or_else(|| panic!("stage {s} missing or out of order:\n{err}"));
        pos += found + s.len();
    }
}

#[test]
fn report_and_samples_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.tsv");
    let csv = dir.path().join("s.csv");
    let out = jte(&[
        "solve",
        "--config",
        &shipped("planar2_ywall.json"),
        "--format",
        "tsv",
        "--report",
        report.to_str().unwrap(),
        "--samples",
        csv.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert!(out.stdout.is_empty());
    let doc = parse_tsv(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc.rows[0].violations, Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample_id,x_1,x_2,f_min_over_constraints"));
    assert_eq!(lines.count(), 10_000);
}

#[test]
fn cone_order_override() {
    let cfg = shipped("planar2_xwall.json");
    let out = jte(&["solve", "--config", &cfg, "--cone-order", "1", "--format", "json-doc", "--omit-timing"]);
    let report: ToleranceReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.cone_order, 1);
    assert!(report.lambda_min > 0.06);
    let bad = jte(&["solve", "--config", &cfg, "--cone-order", "4"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn verify_and_oracle_commands() {
    let cfg = shipped("planar2_xwall.json");
    let ok = jte(&["verify", "--config", &cfg, "--lambda", "0.06"]);
    assert_eq!(ok.status.code(), Some(0));
    let over = jte(&["verify", "--config", &cfg, "--lambda", "0.08"]);
    assert_eq!(over.status.code(), Some(2));
    let oracle = jte(&["oracle", "--config", &cfg]);
    let text = String::from_utf8(oracle.stdout).unwrap();
    assert!(text.starts_with("x-wall\tlambda 0.0682"), "{text}");
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_procmine");

fn asset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(name)
}

fn mini_log() -> PathBuf {
    asset("assets/mini_sepsis.xes")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn inductive_dot_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["discover", "-i", s(&mini_log()), "-o", s(dir.path())]);
    let dot = std::fs::read_to_string(dir.path().join("model.dot")).unwrap();
    assert_eq!(dot, std::fs::read_to_string(asset("tests/golden/mini_inductive.dot")).unwrap());
    assert!(dir.path().join("model.pnml").exists());
}

#[test]
fn variants_match_golden() {
    let out = ok(&["variants", "-i", s(&mini_log())]);
    assert_eq!(out, std::fs::read_to_string(asset("tests/golden/mini_variants.txt")).unwrap());
}

#[test]
fn heuristics_summary_echoes_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "discover",
        "-i",
        s(&mini_log()),
        "--algorithm",
        "heuristics",
        "--dependency-threshold",
        "0.95",
        "--long-distance-threshold",
        "0.98",
        "-o",
        s(dir.path()),
    ]);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["algorithm"], "heuristics");
    assert_eq!(summary["parameters"]["dependency_threshold"], 0.95);
    assert_eq!(summary["parameters"]["long_distance_threshold"], 0.98);
    assert_eq!(summary["log"]["activities"], 15);
}

#[test]
fn unreadable_input_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["discover", "-i", s(&dir.path().join("missing.xes")), "-o", s(&out_dir)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.xes"));
    assert!(!out_dir.exists());
    let report = dir.path().join("r.json");
    let out = run(&["conformance", "-i", s(&mini_log()), "-m", s(&dir.path().join("none.pnml")), "-o", s(&report)]);
    assert!(!out.status.success());
    assert!(!report.exists());
}

#[test]
fn log_fits_its_own_inductive_model() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["discover", "-i", s(&mini_log()), "-o", s(dir.path())]);
    let report = dir.path().join("report.json");
    ok(&[
        "conformance",
        "-i",
        s(&mini_log()),
        "-m",
        s(&dir.path().join("model.pnml")),
        "--format",
        "json",
        "--alignment-fitness",
        "--per-trace",
        "-o",
        s(&report),
    ]);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["fitness"], 1.0);
    assert_eq!(r["alignment_fitness"], 1.0);
    assert_eq!(r["partial"], false);
    assert_eq!(r["traces"].as_array().unwrap().len(), 12);
    for k in ["precision", "generalization", "simplicity"] {
        let v = r[k].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{k} = {v}");
    }
}

#[test]
fn mismatched_alphabet_warns() {
    let out = run(&["conformance", "-i", s(&mini_log()), "--systematic", "--format", "json"]);
    assert!(out.status.success());
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let warnings = r["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("Leucocytes")));
    let with_aliases: Value =
        serde_json::from_str(&ok(&["conformance", "-i", s(&mini_log()), "--systematic", "--sepsis-aliases", "--format", "json"])).unwrap();
    assert!(with_aliases["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn tiny_budget_marks_report_partial() {
    let out = ok(&["conformance", "-i", s(&mini_log()), "--systematic", "--sepsis-aliases", "--format", "json", "--align-budget", "3"]);
    let r: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(r["partial"], true);
    assert!(!r["excluded"].as_array().unwrap().is_empty());
}

#[test]
fn config_file_drives_a_run_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(mini_log(), dir.path().join("log.xes")).unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"
[input]
path = "log.xes"
sepsis_aliases = true

[discovery]
algorithm = "heuristics"
dependency_threshold = 0.5

[model]
output_dir = "model"

[report]
output_dir = "reports"
format = "json"

[[guidelines]]
name = "ab"
anchor = "ER Sepsis Triage"
target = "IV Antibiotics"
limit_hours = 1.0

[[rules]]
rule = 'SIRSCriteria2OrMore = true => contains "IV Liquid"'
"#,
    )
    .unwrap();
    ok(&["-c", s(&cfg), "discover", "--dependency-threshold", "0.7"]);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("model/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["algorithm"], "heuristics");
    assert_eq!(summary["parameters"]["dependency_threshold"], 0.7);
    ok(&["-c", s(&cfg), "guidelines"]);
    let g: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("reports/guidelines.json")).unwrap()).unwrap();
    assert_eq!(g["guidelines"][0]["evaluable_cases"], 10);
    assert_eq!(g["rules"][0]["support"], 8);
    ok(&["-c", s(&cfg), "cohorts", "--format", "text", "-o", s(&dir.path().join("c.txt"))]);
    assert!(std::fs::read_to_string(dir.path().join("c.txt")).unwrap().starts_with("cohort"));
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[discovery]\nnoise = 0.2\n").unwrap();
    let out = run(&["-c", s(&cfg), "variants", "-i", s(&mini_log())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
    let out = run(&["discover", "-i", s(&mini_log()), "--noise", "1.5", "-o", s(dir.path())]);
    assert!(!out.status.success());
}

#[test]
fn convert_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("log.csv");
    std::fs::write(
        &csv,
        "case:concept:name,concept:name,time:timestamp,CRP\n1,a,2014-01-01T10:00:00Z,5.5\n1,b,2014-01-01T11:00:00Z,\n2,a,2014-01-02T10:00:00Z,\n",
    )
    .unwrap();
    let xes = dir.path().join("log.xes");
    ok(&["convert", "-i", s(&csv), "--attribute", "CRP:real", "-o", s(&xes)]);
    let out = ok(&["variants", "-i", s(&xes), "--format", "json"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["stats"]["traces"], 2);
    assert_eq!(v["stats"]["events"], 3);
}

#[test]
fn export_bundled_model() {
    let dot = ok(&["export", "--systematic"]);
    assert!(dot.starts_with("digraph"));
    let pnml = ok(&["export", "--systematic", "--to", "pnml"]);
    assert!(pnml.contains("Release A"));
}

use std::path::Path;
use std::process::{Command, Output};

use accmap::cli::{EvaluateDocument, MappingDocument};
use accmap::SystemTopology;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_accmap")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FAST: [&str; 8] = ["--outer-pop", "6", "--outer-gens", "3", "--inner-pop", "6", "--inner-gens", "3"];

fn fast(args: &[&str]) -> Vec<String> {
    args.iter().chain(FAST.iter()).map(|s| s.to_string()).collect()
}

fn run_owned(args: &[String]) -> Output {
    run(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn unknown_model_is_a_config_error() {
    let o = run(&["map", "--model", "lenet"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("resnet101"), "{}", stderr(&o));
}

#[test]
fn bad_flag_is_a_usage_error() {
    assert_eq!(run(&["map", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["map", "--model", "alexnet", "--outer-pop", "zero"]).status.code(), Some(2));
}

#[test]
fn invalid_ga_settings_are_rejected() {
    let o = run(&["map", "--model", "alexnet", "--outer-pop", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn single_model_commands_refuse_many() {
    let o = run(&["map", "--model", "alexnet,vgg16"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_refuses_the_full_system() {
    let o = run(&["oracle", "--model", "alexnet"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("8 accelerators"), "{}", stderr(&o));
}

#[test]
fn missing_files_are_config_errors() {
    assert_eq!(run(&["map", "--config", "/nonexistent/run.json"]).status.code(), Some(2));
    assert_eq!(run(&["evaluate", "--mapping", "/nonexistent/map.json"]).status.code(), Some(2));
}

#[test]
fn evaluate_rejects_foreign_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.json");
    std::fs::write(&p, "{\"hello\": 1}").unwrap();
    let o = run(&["evaluate", "--mapping", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn round_trip(command: &str, dir: &Path) {
    let out = dir.join(format!("{command}.json"));
    let o = run_owned(&fast(&[command, "--model", "resnet34", "--out", out.to_str().unwrap()]));
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: MappingDocument = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc.command, command);
    assert_eq!(doc.sets.len(), doc.mapping.sets.len());
    let o = run(&["evaluate", "--mapping", out.to_str().unwrap(), "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ev: EvaluateDocument = serde_json::from_slice(&o.stdout).unwrap();
    assert!(ev.matches);
    assert_eq!(ev.report, doc.report);
    let o = run(&["evaluate", "--mapping", out.to_str().unwrap(), "--overlap-ss", "--json"]);
    let hidden: EvaluateDocument = serde_json::from_slice(&o.stdout).unwrap();
    assert!(hidden.overlap_ss);
    assert!(hidden.total_ms <= doc.report.total_ms);
}

#[test]
fn reports_round_trip_through_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    round_trip("map", dir.path());
    round_trip("baseline", dir.path());
}

#[test]
fn embedded_topology_matches_builtin() {
    let o = run(&["baseline", "--model", "alexnet", "--json"]);
    let doc: MappingDocument = serde_json::from_slice(&o.stdout).unwrap();
    let topo = SystemTopology::from_document(doc.topology).unwrap();
    assert_eq!(topo, accmap::build_f1_topology());
}

#[test]
fn config_file_with_relative_paths_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let w = accmap::Workload::new(
        "pair",
        vec![accmap::ConvLayer::square(32, 16, 28, 3, 1), accmap::ConvLayer::square(64, 32, 28, 3, 2)],
    )
    .unwrap();
    std::fs::write(dir.path().join("pair.json"), w.emit()).unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"workload": "pair.json", "seed": 11, "outer": {"population": 6, "generations": 3}, "inner": {"population": 6, "generations": 3}}"#,
    )
    .unwrap();
    let cfg = dir.path().join("run.json");
    let o = run(&["map", "--config", cfg.to_str().unwrap(), "--seed", "12", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: MappingDocument = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc.config.seed, 12);
    assert_eq!(doc.config.outer.population, 6);
    assert_eq!(doc.workload.into_workload().unwrap(), w);
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"model": ["alexnet"], "popsize": 4}"#).unwrap();
    assert_eq!(run(&["map", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn table_output_names_sets_and_strategies() {
    let o = run_owned(&fast(&["map", "--model", "alexnet"]));
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("Conv1"), "{text}");
    assert!(text.contains("ES="), "{text}");
    assert!(!text.contains("-0.000"), "{text}");
}

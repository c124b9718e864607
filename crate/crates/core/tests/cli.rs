mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cqw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqw")).args(args).output().expect("runs cqw")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn perfect_run_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::replay20_dir().join("manifest.json");
    let corpus = common::load_replay20();
    let run = dir.path().join("gold.jsonl");
    let preds: Vec<_> = corpus
        .records
        .iter()
        .map(|r| cq_workbench::harness::Prediction::new(&r.id, r.normalized_gold()))
        .collect();
    cq_workbench::harness::write_run_file(&run, &preds).unwrap();
    let o = cqw(&["score", "--run", p(&run), "--corpus", p(&manifest)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("macro-F1 = 1.00"), "{text}");
    assert!(text.contains("accuracy = 1.00"), "{text}");
}

#[test]
fn replay_judge_then_score() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::replay20_dir().join("manifest.json");
    let completions = common::replay20_dir().join("completions");
    let run = dir.path().join("run.jsonl");
    let results = dir.path().join("results.json");
    let o = cqw(&[
        "--quiet", "judge", "--backend", "replay", "--replay-dir", p(&completions), "--corpus", p(&manifest),
        "--out", p(&run), "--results", p(&results),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = cqw(&["score", "--run", p(&run), "--corpus", p(&manifest)]);
    assert!(stdout(&o).contains("accuracy = 0.75"), "{}", stdout(&o));

    let bundle = dir.path().join("bundle");
    let o = cqw(&[
        "--quiet", "plan", "--corpus", p(&manifest), "--participant-count", "4", "--bundle", p(&bundle),
        "--results", p(&results),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "plans.json", "suggestions.json", "ontologies/organs.ttl"] {
        assert!(bundle.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn infeasible_sample_names_the_filter() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_synthetic_manifest(dir.path(), 40, 20, 4);
    let cons = dir.path().join("constraints.json");
    std::fs::write(&cons, r#"{"target_size": 40, "max_per_project": 10}"#).unwrap();
    let out = dir.path().join("small.json");
    let o = cqw(&["sample", "--corpus", p(&manifest), "--constraints", p(&cons), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("complex_only"), "{err}");
    assert!(!out.exists());
}

#[test]
fn feasible_sample_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_synthetic_manifest(dir.path(), 120, 60, 4);
    let out = dir.path().join("small.json");
    let o = cqw(&["--seed", "3", "sample", "--corpus", p(&manifest), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("sampled 20 records (seed 3)"), "{}", stdout(&o));
    let small = cq_workbench::corpus::load_corpus(&out).unwrap();
    assert_eq!(small.len(), 20);
}

#[test]
fn baseline_on_full_size_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_synthetic_manifest(dir.path(), 1204, 189, 8);
    let o = cqw(&["baseline", "--corpus", p(&manifest)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("n = 1393"), "{text}");
    assert!(text.contains("closed-form macro-F1 = 0.4235"), "{text}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(cqw(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cqw(&["score"]).status.code(), Some(2));
    assert_eq!(cqw(&["judge", "--corpus", "x", "--out", "y", "--backend", "carrier-pigeon"]).status.code(), Some(2));
    assert_eq!(cqw(&["--help"]).status.code(), Some(0));
}

#[test]
fn domain_errors_exit_one() {
    let o = cqw(&["stats", "--corpus", "/nonexistent/manifest.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_synthetic_manifest(dir.path(), 30, 10, 1);
    let cfg = dir.path().join("cqw.toml");
    std::fs::write(&cfg, "seed = 5\nquiet = true\n").unwrap();
    let seed_of = |extra: &[&str]| {
        let mut args = vec!["--config", p(&cfg)];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["baseline", "--trials", "10", "--json", "--corpus", p(&manifest)]);
        let o = cqw(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        v["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&[]), 5);
    assert_eq!(seed_of(&["--seed", "9"]), 9);

    std::fs::write(&cfg, "sede = 5\n").unwrap();
    let o = cqw(&["--config", p(&cfg), "stats", "--corpus", p(&manifest)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn classify_and_verify() {
    let o = cqw(&["classify", "--formalization", r#"{"classes":["Person","Organ"],"slots":[["built","renovated"]]}"#]);
    assert_eq!(stdout(&o).trim(), "Simple");
    let onto = common::replay20_dir().join("ontologies/organs.ttl");
    let o = cqw(&[
        "verify", "--ontology", p(&onto), "--query",
        "PREFIX : <http://example.org/organs#> SELECT ?o WHERE { ?o :builtBy ?p }",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["grounding"]["verdict"], "fully_grounded");
    assert_eq!(v["execution_nonempty"], true);
}

#[test]
fn ingest_rates_difficulty_from_formalization() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let manifest = common::fixtures().join("corpus/manifest.json");
    let o = cqw(&["--quiet", "ingest", "--corpus", p(&manifest), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v[1]["difficulty"], "complex");
}

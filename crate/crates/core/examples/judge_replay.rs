//! Judge the 20-record fixture with recorded completions and score the run.

use std::sync::Arc;

use cq_workbench::corpus::load_corpus;
use cq_workbench::harness::{predictions_from_results, render_run, score_run};
use cq_workbench::judge::{Judge, ModelConfig, ReplayBackend};

fn main() -> anyhow::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/replay20");
    let corpus = load_corpus(dir.join("manifest.json"))?;
    let backend = ReplayBackend::new(dir.join("completions"))?;
    let judge = Judge::new(ModelConfig::default(), Arc::new(backend));

    let results = judge.judge_corpus(&corpus, 1, 4);
    for r in &results {
        if let Some(s) = r.suggestion() {
            let partial = if s.partial { " (partial query)" } else { "" };
            println!("{}: {}{partial}", r.record_id, s.label);
        }
    }
    let preds = predictions_from_results(&results);
    println!("\nrun file:\n{}", render_run(&preds));
    print!("{}", score_run(&preds, &corpus)?);
    Ok(())
}

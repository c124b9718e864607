//! Load a manifest and print the corpus summary plus difficulty ratings.
//!
//!     cargo run --example corpus_stats [manifest.json]

use std::path::PathBuf;

use cq_workbench::corpus::{axiom_count, corpus_stats, load_corpus};
use cq_workbench::difficulty::classify_difficulty;

fn main() -> anyhow::Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/replay20/manifest.json"));
    let corpus = load_corpus(&path)?;
    print!("{}", corpus_stats(&corpus));
    println!();
    for r in &corpus.records {
        let rated = r.formalization.as_ref().map(classify_difficulty);
        let axioms = corpus.ontology_for(r).map(|o| axiom_count(o)).unwrap_or(0);
        println!(
            "{:<8} gold={:<3} {:?} (formalization: {:?}), {} axioms  {}",
            r.id,
            r.normalized_gold().to_string(),
            r.difficulty,
            rated,
            axioms,
            r.cq_text
        );
    }
    Ok(())
}

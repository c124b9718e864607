//! Draw a balanced 20-record evaluation set from a synthetic 300-record
//! corpus, capped at three records per project.

use cq_workbench::corpus::{Corpus, CqRecord, Difficulty, GoldLabel, Source};
use cq_workbench::sampler::{sample_small, SamplingConstraints};

fn record(i: usize) -> CqRecord {
    let source = if i % 5 < 3 { Source::HumanCurated } else { Source::LlmGenerated };
    let gold = match i % 7 {
        0 | 1 => GoldLabel::No,
        2 => GoldLabel::NoMinor,
        _ => GoldLabel::Yes,
    };
    CqRecord {
        id: format!("cq-{i:03}"),
        cq_text: format!("Question {i}?"),
        story_text: String::new(),
        story_oneline: None,
        ontology_ref: format!("project-{}.ttl", i % 15),
        gold,
        difficulty: if i.is_multiple_of(4) { Difficulty::Simple } else { Difficulty::Complex },
        source,
        project: format!("project-{}", i % 15),
        generator_model: (source == Source::LlmGenerated).then(|| format!("model-{}", i % 3)),
        formalization: None,
    }
}

fn main() -> anyhow::Result<()> {
    let corpus = Corpus::from_records((0..300).map(record).collect())?;
    let constraints = SamplingConstraints {
        seed: 7,
        ..SamplingConstraints::default()
    };
    let out = sample_small(&corpus, &constraints, None)?;
    println!("{:#?}", out.summary);
    for r in &out.corpus.records {
        println!("{} {} {} {:?}", r.id, r.project, r.source, r.normalized_gold());
    }
    Ok(())
}

//! Simulate a small cohort offline with manual clocks, then build the study
//! report from the resulting event log.

use std::collections::BTreeMap;
use std::time::Duration;

use cq_workbench::analysis::{build_report, StudyData};
use cq_workbench::corpus::{load_corpus, Label};
use cq_workbench::study::{build_assignment, Answer, Condition, EventLog, Expertise, Participant, Session, StudyEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/replay20");
    let corpus = load_corpus(fixture.join("manifest.json"))?;
    let ids: Vec<String> = corpus.records.iter().map(|r| r.id.clone()).collect();
    let participants: Vec<Participant> = (0..8)
        .map(|i| Participant::new(format!("p{i}"), if i < 3 { Expertise::Expert } else { Expertise::NonExpert }))
        .collect();
    let plans = build_assignment(&participants, &ids, 3)?;

    // Pretend every suggestion is right except on every fourth record.
    let suggestions: BTreeMap<String, Label> = corpus
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let g = r.normalized_gold();
            (r.id.clone(), if i % 4 == 3 { g.flip() } else { g })
        })
        .collect();

    let log = EventLog::in_memory();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (n, plan) in plans.into_iter().enumerate() {
        let token = format!("t{n}");
        log.append(&StudyEvent::SessionCreated { token: token.clone(), plan: plan.clone() })?;
        let mut s = Session::new(token.clone(), plan.clone());
        let mut now = Duration::ZERO;
        s.start(now);
        for t in &plan.ordered_tasks {
            now += Duration::from_secs(rng.random_range(30..90));
            let gold = corpus.record(&t.record_id).expect("planned record").normalized_gold();
            let p_right = if t.condition == Condition::Assisted { 0.85 } else { 0.7 };
            let label = if rng.random_bool(p_right) { gold } else { gold.flip() };
            let answer = match label {
                _ if rng.random_bool(0.05) => Answer::Idk,
                Label::Yes => Answer::Yes,
                Label::No => Answer::No,
            };
            s.submit(now, &t.record_id, answer, Some(rng.random_range(1..=5)))?;
        }
        let items: Vec<u8> = (0..10).map(|i| if i % 2 == 0 { 4 } else { 2 }).collect();
        let survey = s.submit_survey(now, &items)?;
        for response in s.drain_unlogged() {
            log.append(&StudyEvent::Response { token: token.clone(), response })?;
        }
        log.append(&StudyEvent::Survey { token, survey })?;
    }

    let data = StudyData::from_events(&log.events())?;
    let report = build_report(&data, &corpus, &suggestions)?;
    print!("{}", report.render_text());
    Ok(())
}

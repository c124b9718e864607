//! Pack the fixture into a study bundle, serve it on a local port and walk
//! one participant through the HTTP API. Prints the exported event log.

use std::sync::Arc;

use cq_workbench::corpus::load_corpus;
use cq_workbench::judge::{Judge, ModelConfig, ReplayBackend};
use cq_workbench::sparql::VerifyOptions;
use cq_workbench::study::{
    build_assignment, freeze_suggestions, serve, AppState, EventLog, Expertise, Participant, StudyBundle,
    SystemClock,
};
use serde_json::{json, Value};

fn main() -> anyhow::Result<()> {
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/replay20");
    let corpus = load_corpus(fixture.join("manifest.json"))?;
    let judge = Judge::new(ModelConfig::default(), Arc::new(ReplayBackend::new(fixture.join("completions"))?));
    let cards = freeze_suggestions(&corpus, &judge.judge_corpus(&corpus, 1, 4), VerifyOptions { execute: true });
    let ids: Vec<String> = corpus.records.iter().map(|r| r.id.clone()).collect();
    let plans = build_assignment(&[Participant::new("p1", Expertise::Expert)], &ids, 1)?;

    let dir = tempfile::tempdir()?;
    let bundle = StudyBundle::write(dir.path(), &corpus, &cards, &plans)?;
    let state = AppState::new(bundle, EventLog::in_memory(), Arc::new(SystemClock::new()), 0);

    let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
    listener.set_nonblocking(true)?;
    let base = format!("http://{}", listener.local_addr()?);
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().expect("runtime");
        rt.block_on(async move {
            let l = tokio::net::TcpListener::from_std(listener).expect("listener");
            serve(state, l).await.expect("server");
        });
    });
    println!("serving {base}");

    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let post = |path: &str, body: Value| -> anyhow::Result<Value> {
        Ok(agent.post(format!("{base}{path}")).send_json(&body)?.body_mut().read_json()?)
    };
    let get = |path: &str| -> anyhow::Result<Value> { Ok(agent.get(format!("{base}{path}")).call()?.body_mut().read_json()?) };

    let token = post("/sessions", json!({"participant_id": "p1"}))?["token"].as_str().unwrap_or_default().to_owned();
    loop {
        let task = get(&format!("/sessions/{token}/task"))?;
        if task["status"] != "task" {
            break;
        }
        // Follow the suggestion when there is one, otherwise say no.
        let answer = task["suggestion"]["label"].as_str().unwrap_or("no").to_owned();
        println!("{} [{}] {} -> {answer}", task["index"], task["condition"].as_str().unwrap_or("?"), task["cq_text"].as_str().unwrap_or(""));
        post(
            &format!("/sessions/{token}/response"),
            json!({"record_id": task["record_id"], "answer": answer, "difficulty": 3}),
        )?;
    }
    let sus = post(&format!("/sessions/{token}/survey"), json!({"items": [4, 2, 5, 1, 4, 2, 4, 2, 5, 1]}))?;
    println!("SUS {}", sus["score"]);
    let export = agent.get(format!("{base}/admin/export")).call()?.body_mut().read_to_string()?;
    println!("{} events logged; last: {}", export.lines().count(), export.lines().last().unwrap_or_default());
    Ok(())
}

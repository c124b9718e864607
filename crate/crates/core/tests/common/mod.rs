#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cq_workbench::corpus::{load_corpus, Corpus, CqRecord, Difficulty, GoldLabel, ManifestRecord, Source};
use cq_workbench::judge::{
    prompt_digest, render_completion, Judge, JudgeResult, ModelConfig, ReplayBackend, StubBackend,
};
use cq_workbench::study::{serve, AppState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn replay20_dir() -> PathBuf {
    fixtures().join("replay20")
}

pub fn load_replay20() -> Corpus {
    load_corpus(replay20_dir().join("manifest.json")).expect("replay20 corpus loads")
}

pub fn replay20_judge() -> Judge {
    let backend = ReplayBackend::new(replay20_dir().join("completions")).expect("completions dir");
    Judge::new(ModelConfig::default(), Arc::new(backend))
}

pub fn judge_replay20(corpus: &Corpus) -> Vec<JudgeResult> {
    replay20_judge().judge_corpus(corpus, 1, 4)
}

/// Records with the given gold counts. Half of the No records are stored as
/// NoMinor, and sources, projects and generators rotate.
pub fn synthetic_records(n_yes: usize, n_no: usize, seed: u64) -> Vec<CqRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut golds: Vec<GoldLabel> = std::iter::repeat_n(GoldLabel::Yes, n_yes)
        .chain((0..n_no).map(|i| if i % 2 == 0 { GoldLabel::No } else { GoldLabel::NoMinor }))
        .collect();
    rand::seq::SliceRandom::shuffle(golds.as_mut_slice(), &mut rng);
    golds
        .into_iter()
        .enumerate()
        .map(|(i, gold)| {
            let source = if rng.random_bool(0.5) { Source::LlmGenerated } else { Source::HumanCurated };
            let project = format!("P{}", i % 12);
            CqRecord {
                id: format!("syn-{i:05}"),
                cq_text: format!("Which thing number {i} relates to another thing?"),
                story_text: format!("Story of project {project}."),
                story_oneline: Some(format!("Project {project}.")),
                ontology_ref: format!("{project}.ttl"),
                gold,
                difficulty: if i % 3 == 0 { Difficulty::Simple } else { Difficulty::Complex },
                source,
                project,
                generator_model: (source == Source::LlmGenerated).then(|| format!("gen-{}", i % 4)),
                formalization: None,
            }
        })
        .collect()
}

pub fn synthetic_corpus(n_yes: usize, n_no: usize, seed: u64) -> Corpus {
    Corpus::from_records(synthetic_records(n_yes, n_no, seed)).expect("valid synthetic corpus")
}

/// Write a synthetic manifest whose records all point at one small ontology.
pub fn write_synthetic_manifest(dir: &Path, n_yes: usize, n_no: usize, seed: u64) -> PathBuf {
    std::fs::copy(
        fixtures().join("replay20/ontologies/organs.ttl"),
        dir.join("organs.ttl"),
    )
    .expect("copy ontology");
    let records: Vec<ManifestRecord> = synthetic_records(n_yes, n_no, seed)
        .iter()
        .map(|r| ManifestRecord::from_record(r, "organs.ttl".to_owned()))
        .collect();
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&records).unwrap()).unwrap();
    path
}

/// A judge whose backend answers every record of `corpus` with its gold label.
pub fn gold_echo_judge(corpus: &Corpus) -> Judge {
    let probe = Judge::new(ModelConfig::default(), Arc::new(StubBackend::fixed("")));
    let script: BTreeMap<String, String> = corpus
        .records
        .iter()
        .map(|r| {
            let prompt = probe.prompt_for(r, corpus).expect("prompt renders");
            let text = render_completion(r.normalized_gold(), "ASK { ?s ?p ?o }", false);
            (prompt_digest(&prompt), text)
        })
        .collect();
    Judge::new(ModelConfig::default(), Arc::new(StubBackend::scripted(script, "no answer here")))
}

pub struct TestServer {
    pub base: String,
    pub state: Arc<AppState>,
}

/// Serve `state` on an ephemeral port from a background runtime.
pub fn spawn_server(state: Arc<AppState>) -> TestServer {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").expect("bind");
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    let st = state.clone();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let l = tokio::net::TcpListener::from_std(listener).unwrap();
            serve(st, l).await.unwrap();
        });
    });
    TestServer {
        base: format!("http://{addr}"),
        state,
    }
}

pub struct Http {
    agent: ureq::Agent,
    base: String,
}

impl Http {
    pub fn new(base: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            base: base.to_owned(),
        }
    }

    pub fn get_text(&self, path: &str) -> (u16, String, Option<String>) {
        let mut resp = self.agent.get(format!("{}{path}", self.base)).call().expect("request");
        let ctype = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(str::to_owned);
        let status = resp.status().as_u16();
        (status, resp.body_mut().read_to_string().unwrap(), ctype)
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let (status, text, _) = self.get_text(path);
        (status, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    pub fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let mut resp = self
            .agent
            .post(format!("{}{path}", self.base))
            .send_json(body)
            .expect("request");
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::Null))
    }
}

//! Automatic CQ verification: prompt an LLM with the story, the CQ and the
//! ontology, then extract a Yes/No label plus a SPARQL suggestion.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CqRecord};

mod backend;
mod extract;
mod prompt;

pub use backend::{
    backend_for, request_judgment, Backend, BackendError, BackendKind, CompletionCache, ConfigError,
    ModelConfig, RemoteHttpBackend, ReplayBackend, StubBackend, ENV_ENDPOINT, ENV_KEY, ENV_MODEL,
};
pub use extract::{extract_answer, render_completion, ExtractionFailure, Suggestion};
pub use prompt::{
    build_prompt, default_shots, parse_shots, prompt_digest, PromptError, PromptSpec, PromptTemplate,
    Shot, DEFAULT_TASK, DEFAULT_TEMPLATE, PLACEHOLDERS,
};

/// Why a record produced no usable suggestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JudgeFailure {
    /// The completion had no recognizable answer line.
    Extraction { raw_completion: String },
    Backend { error: BackendError },
    Prompt { message: String },
}

impl std::fmt::Display for JudgeFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JudgeFailure::Extraction { .. } => f.write_str("no answer label in completion"),
            JudgeFailure::Backend { error } => write!(f, "{error}"),
            JudgeFailure::Prompt { message } => f.write_str(message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeOutcome {
    Suggestion(Suggestion),
    Failure(JudgeFailure),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeResult {
    pub record_id: String,
    pub outcome: JudgeOutcome,
    pub latency_ms: f64,
    pub run_index: u32,
    pub cache_hit: bool,
}

impl JudgeResult {
    pub fn suggestion(&self) -> Option<&Suggestion> {
        match &self.outcome {
            JudgeOutcome::Suggestion(s) => Some(s),
            JudgeOutcome::Failure(_) => None,
        }
    }

    pub fn latency(&self) -> Duration {
        Duration::from_secs_f64(self.latency_ms / 1000.0)
    }
}

/// Everything needed to judge records: template, exemplars, model settings,
/// backend and completion cache.
pub struct Judge {
    pub template: PromptTemplate,
    pub task_description: String,
    pub shots: Vec<Shot>,
    pub config: ModelConfig,
    backend: Arc<dyn Backend>,
    cache: Arc<CompletionCache>,
}

impl Judge {
    pub fn new(config: ModelConfig, backend: Arc<dyn Backend>) -> Self {
        Self {
            template: PromptTemplate::default(),
            task_description: DEFAULT_TASK.trim().to_owned(),
            shots: default_shots(),
            config,
            backend,
            cache: Arc::new(CompletionCache::new()),
        }
    }

    pub fn with_cache(mut self, cache: Arc<CompletionCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_shots(mut self, shots: Vec<Shot>) -> Self {
        self.shots = shots;
        self
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.template = template;
        self
    }

    pub fn cache(&self) -> &CompletionCache {
        &self.cache
    }

    fn shot_sources(&self) -> BTreeSet<&str> {
        self.shots
            .iter()
            .filter_map(|s| s.source_record.as_deref())
            .collect()
    }

    /// The exact prompt sent for `record`.
    pub fn prompt_for(&self, record: &CqRecord, corpus: &Corpus) -> Result<String, PromptError> {
        if self.shot_sources().contains(record.id.as_str()) {
            return Err(PromptError::MissingSection(
                "shots (exemplar drawn from the evaluated record)",
            ));
        }
        let ontology_text = corpus
            .ontology_for(record)
            .map(|o| o.to_turtle())
            .unwrap_or_default();
        let spec = PromptSpec {
            task_description: self.task_description.clone(),
            shots: self.shots.clone(),
            story: record.story_text.clone(),
            cq: record.cq_text.clone(),
            ontology_text,
        };
        self.template.render(&spec)
    }

    /// Prompt, complete and extract for one record. Failures are recorded in
    /// the result, never returned as errors.
    pub fn judge_record(&self, record: &CqRecord, corpus: &Corpus, run_index: u32) -> JudgeResult {
        let started = Instant::now();
        let (outcome, cache_hit) = match self.prompt_for(record, corpus) {
            Err(e) => (
                JudgeOutcome::Failure(JudgeFailure::Prompt {
                    message: e.to_string(),
                }),
                false,
            ),
            Ok(prompt) => {
                match request_judgment(&prompt, &self.config, self.backend.as_ref(), &self.cache, run_index) {
                    Err(error) => (JudgeOutcome::Failure(JudgeFailure::Backend { error }), false),
                    Ok((text, hit)) => match extract_answer(&text) {
                        Ok(s) => (JudgeOutcome::Suggestion(s), hit),
                        Err(f) => (
                            JudgeOutcome::Failure(JudgeFailure::Extraction {
                                raw_completion: f.raw_completion,
                            }),
                            hit,
                        ),
                    },
                }
            }
        };
        JudgeResult {
            record_id: record.id.clone(),
            outcome,
            latency_ms: started.elapsed().as_secs_f64() * 1000.0,
            run_index,
            cache_hit,
        }
    }

    /// Judge every record with at most `jobs` concurrent requests. Results
    /// come back in corpus order.
    pub fn judge_corpus(&self, corpus: &Corpus, run_index: u32, jobs: usize) -> Vec<JudgeResult> {
        self.judge_corpus_with_progress(corpus, run_index, jobs, |_| {})
    }

    pub fn judge_corpus_with_progress(
        &self,
        corpus: &Corpus,
        run_index: u32,
        jobs: usize,
        progress: impl Fn(&JudgeResult) + Sync,
    ) -> Vec<JudgeResult> {
        use rayon::prelude::*;
        let run = || {
            corpus
                .records
                .par_iter()
                .map(|r| {
                    let res = self.judge_record(r, corpus, run_index);
                    progress(&res);
                    res
                })
                .collect()
        };
        match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
            Ok(pool) => pool.install(run),
            Err(_) => corpus
                .records
                .iter()
                .map(|r| self.judge_record(r, corpus, run_index))
                .collect(),
        }
    }
}

/// Free-function form of [`Judge::judge_record`].
pub fn judge_record(judge: &Judge, record: &CqRecord, corpus: &Corpus, run_index: u32) -> JudgeResult {
    judge.judge_record(record, corpus, run_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_corpus, Label};
    use std::collections::BTreeMap;

    fn corpus() -> Corpus {
        load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/corpus/manifest.json")).unwrap()
    }

    #[test]
    fn stub_yes() {
        let c = corpus();
        let j = Judge::new(ModelConfig::default(), Arc::new(StubBackend::fixed("Answer: Yes")));
        let r = j.judge_record(&c.records[0], &c, 1);
        assert_eq!(r.suggestion().unwrap().label, Label::Yes);
        assert!(!r.cache_hit);
        assert!(j.judge_record(&c.records[0], &c, 1).cache_hit);
    }

    #[test]
    fn stub_garbage_is_extraction_failure() {
        let c = corpus();
        let j = Judge::new(ModelConfig::default(), Arc::new(StubBackend::fixed("lorem ipsum")));
        let r = j.judge_record(&c.records[0], &c, 1);
        assert!(matches!(r.outcome, JudgeOutcome::Failure(JudgeFailure::Extraction { .. })));
    }

    #[test]
    fn prompt_contains_record_and_ontology() {
        let c = corpus();
        let j = Judge::new(ModelConfig::default(), Arc::new(StubBackend::fixed("")));
        let rec = &c.records[0];
        let p = j.prompt_for(rec, &c).unwrap();
        assert!(p.contains(&rec.cq_text));
        assert!(p.contains("owl:Class"));
    }

    #[test]
    fn shot_record_cannot_be_evaluated() {
        let c = corpus();
        let mut shots = default_shots();
        shots[0].source_record = Some(c.records[1].id.clone());
        let j = Judge::new(ModelConfig::default(), Arc::new(StubBackend::fixed("Answer: Yes"))).with_shots(shots);
        let r = j.judge_record(&c.records[1], &c, 1);
        assert!(matches!(r.outcome, JudgeOutcome::Failure(JudgeFailure::Prompt { .. })));
    }

    #[test]
    fn parallel_results_keep_corpus_order_and_are_deterministic() {
        let c = corpus();
        let j = Judge::new(ModelConfig::default(), Arc::new(StubBackend::fixed("")));
        let scripted: BTreeMap<String, String> = c
            .records
            .iter()
            .map(|r| {
                let gold = r.normalized_gold();
                (prompt_digest(&j.prompt_for(r, &c).unwrap()), render_completion(gold, "ASK {}", false))
            })
            .collect();
        let make = || Judge::new(ModelConfig::default(), Arc::new(StubBackend::scripted(scripted.clone(), "")));
        let strip = |rs: Vec<JudgeResult>| -> Vec<(String, JudgeOutcome)> {
            rs.into_iter().map(|r| (r.record_id, r.outcome)).collect()
        };
        let a = strip(make().judge_corpus(&c, 1, 4));
        let b = strip(make().judge_corpus(&c, 1, 1));
        assert_eq!(a, b);
        let ids: Vec<_> = a.iter().map(|x| x.0.clone()).collect();
        let expected: Vec<_> = c.records.iter().map(|r| r.id.clone()).collect();
        assert_eq!(ids, expected);
        for ((_, out), rec) in a.iter().zip(&c.records) {
            let JudgeOutcome::Suggestion(s) = out else { panic!() };
            assert_eq!(s.label, rec.normalized_gold());
        }
    }
}

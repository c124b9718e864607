use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::corpus::{load_corpus, Corpus, CorpusError, Ontology};
use crate::judge::JudgeResult;
use crate::sparql::{verify_suggestion, VerifyOptions};

use super::{Condition, SessionPlan, SessionStatus, SuggestionCard, TaskView};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUGGESTIONS_FILE: &str = "suggestions.json";
pub const PLANS_FILE: &str = "plans.json";
pub const ONTOLOGY_DIR: &str = "ontologies";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("plan for {participant} uses unknown record {record}")]
    UnknownRecord { participant: String, record: String },
    #[error("record {0} is assisted in some plan but has no frozen suggestion")]
    MissingSuggestion(String),
    #[error("record {0} has no one-line story summary; run `condense` first")]
    MissingSummary(String),
}

fn file_err(path: &Path) -> impl Fn(String) -> BundleError + '_ {
    move |message| BundleError::File { path: path.to_owned(), message }
}

/// Everything a study server needs, frozen before any session starts:
/// the study records with their ontologies, one suggestion card per record
/// and the participants' plans.
#[derive(Debug, Clone)]
pub struct StudyBundle {
    pub dir: PathBuf,
    pub corpus: Corpus,
    pub suggestions: BTreeMap<String, SuggestionCard>,
    pub plans: Vec<SessionPlan>,
}

impl StudyBundle {
    pub fn new(
        dir: impl Into<PathBuf>,
        corpus: Corpus,
        suggestions: Vec<SuggestionCard>,
        plans: Vec<SessionPlan>,
    ) -> Result<Self, BundleError> {
        let b = Self {
            dir: dir.into(),
            corpus,
            suggestions: suggestions.into_iter().map(|s| (s.record_id.clone(), s)).collect(),
            plans,
        };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<(), BundleError> {
        for r in &self.corpus.records {
            if r.story_oneline.as_deref().is_none_or(|s| s.trim().is_empty()) {
                return Err(BundleError::MissingSummary(r.id.clone()));
            }
        }
        for p in &self.plans {
            for t in &p.ordered_tasks {
                if self.corpus.record(&t.record_id).is_none() {
                    return Err(BundleError::UnknownRecord {
                        participant: p.participant_id.clone(),
                        record: t.record_id.clone(),
                    });
                }
                if t.condition == Condition::Assisted && !self.suggestions.contains_key(&t.record_id) {
                    return Err(BundleError::MissingSuggestion(t.record_id.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, BundleError> {
        let dir = dir.as_ref();
        let corpus = load_corpus(dir.join(MANIFEST_FILE))?;
        let read = |name: &str| -> Result<String, BundleError> {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| file_err(&p)(e.to_string()))
        };
        let sp = dir.join(SUGGESTIONS_FILE);
        let suggestions: Vec<SuggestionCard> =
            serde_json::from_str(&read(SUGGESTIONS_FILE)?).map_err(|e| file_err(&sp)(e.to_string()))?;
        let pp = dir.join(PLANS_FILE);
        let plans: Vec<SessionPlan> =
            serde_json::from_str(&read(PLANS_FILE)?).map_err(|e| file_err(&pp)(e.to_string()))?;
        Self::new(dir, corpus, suggestions, plans)
    }

    /// Write the bundle to `dir`, copying the ontology files under
    /// `ontologies/`. Returns the bundle as reloaded from disk.
    pub fn write(
        dir: impl AsRef<Path>,
        corpus: &Corpus,
        suggestions: &[SuggestionCard],
        plans: &[SessionPlan],
    ) -> Result<Self, BundleError> {
        let dir = dir.as_ref();
        let odir = dir.join(ONTOLOGY_DIR);
        std::fs::create_dir_all(&odir).map_err(|e| file_err(&odir)(e.to_string()))?;
        let mut used: BTreeMap<String, usize> = BTreeMap::new();
        let mut ontologies = BTreeMap::new();
        for (id, o) in &corpus.ontologies {
            let name = o.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "ontology.ttl".into());
            let n = used.entry(name.clone()).or_default();
            let target_name = if *n == 0 { name } else { format!("{n}_{name}") };
            *n += 1;
            let target = odir.join(&target_name);
            std::fs::copy(&o.path, &target).map_err(|e| file_err(&o.path)(e.to_string()))?;
            let moved = Ontology { path: target, ..(**o).clone() };
            ontologies.insert(id.clone(), Arc::new(moved));
        }
        let copied = Corpus { records: corpus.records.clone(), ontologies };
        copied.write_manifest(&dir.join(MANIFEST_FILE))?;
        let write_json = |name: &str, json: String| {
            let p = dir.join(name);
            std::fs::write(&p, json + "\n").map_err(|e| file_err(&p)(e.to_string()))
        };
        write_json(SUGGESTIONS_FILE, serde_json::to_string_pretty(suggestions).expect("serializes"))?;
        write_json(PLANS_FILE, serde_json::to_string_pretty(plans).expect("serializes"))?;
        Self::load(dir)
    }

    pub fn plan_for(&self, participant_id: &str) -> Option<&SessionPlan> {
        self.plans.iter().find(|p| p.participant_id == participant_id)
    }

    /// File name under which a record's ontology is served.
    pub fn ontology_file_name(&self, record_id: &str) -> Option<String> {
        let r = self.corpus.record(record_id)?;
        let o = self.corpus.ontology_for(r)?;
        o.path.file_name().map(|n| n.to_string_lossy().into_owned())
    }

    /// Path of a served ontology, only for files the bundle references.
    pub fn ontology_path(&self, file_name: &str) -> Option<&Path> {
        self.corpus
            .ontologies
            .values()
            .map(|o| o.path.as_path())
            .find(|p| p.file_name().is_some_and(|n| n == file_name))
    }

    /// Participant-facing view of the current task. The suggestion card is
    /// attached exactly for Assisted tasks.
    pub fn task_view(&self, status: &SessionStatus) -> Option<TaskView> {
        let SessionStatus::Task { index, total, record_id, condition, remaining_ms } = status else {
            return None;
        };
        let r = self.corpus.record(record_id)?;
        Some(TaskView {
            index: *index,
            total: *total,
            record_id: record_id.clone(),
            condition: *condition,
            cq_text: r.cq_text.clone(),
            story_oneline: r.story_oneline.clone().unwrap_or_default(),
            ontology_url: format!("/ontologies/{}", self.ontology_file_name(record_id).unwrap_or_default()),
            remaining_ms: *remaining_ms,
            suggestion: match condition {
                Condition::Assisted => self.suggestions.get(record_id).cloned(),
                Condition::Unassisted => None,
            },
        })
    }
}

/// Suggestion cards from one judge run, each verified against its record's
/// ontology. Failed judgments yield no card.
pub fn freeze_suggestions(corpus: &Corpus, results: &[JudgeResult], opts: VerifyOptions) -> Vec<SuggestionCard> {
    results
        .iter()
        .filter_map(|res| {
            let s = res.suggestion()?;
            let r = corpus.record(&res.record_id)?;
            let o = corpus.ontology_for(r)?;
            Some(SuggestionCard {
                record_id: res.record_id.clone(),
                label: s.label,
                sparql: s.sparql.clone(),
                partial: s.partial,
                verification: verify_suggestion(s, o, opts),
            })
        })
        .collect()
}

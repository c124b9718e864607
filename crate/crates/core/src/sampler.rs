//! Small balanced evaluation subsets, and one-line story summaries.
//!
//! Hard filters (no NoMinor, Complex only, a per-project cap) are applied
//! strictly. Soft targets (source balance, modelled balance, a prior-run
//! correctness profile, generator diversity) are scored as a weighted sum of
//! tolerance excesses and minimised by seeded greedy sampling with restarts
//! and swap-based local search.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CqRecord, Difficulty, GoldLabel, Label, Source};
use crate::harness::{PredictedLabel, Prediction};
use crate::judge::{request_judgment, Backend, BackendError, CompletionCache, ModelConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftWeights {
    pub source: f64,
    pub modelled: f64,
    pub correctness: f64,
    pub generator_diversity: f64,
}

impl Default for SoftWeights {
    fn default() -> Self {
        Self {
            source: 1.0,
            modelled: 1.0,
            correctness: 1.0,
            generator_diversity: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConstraints {
    pub target_size: usize,
    pub exclude_no_minor: bool,
    pub complex_only: bool,
    pub max_per_project: usize,
    /// Allowed |#LLM-generated − #human-curated|.
    pub balance_source: usize,
    /// Allowed |#modelled − #not modelled|.
    pub balance_modelled: usize,
    /// Target fractions keyed `correct` / `incorrect`, matched against a
    /// prior run's predictions.
    pub llm_correctness_profile: Option<BTreeMap<String, f64>>,
    pub seed: u64,
    pub weights: SoftWeights,
    pub restarts: usize,
    pub local_search_steps: usize,
}

impl Default for SamplingConstraints {
    fn default() -> Self {
        Self {
            target_size: 20,
            exclude_no_minor: true,
            complex_only: true,
            max_per_project: 3,
            balance_source: 0,
            balance_modelled: 0,
            llm_correctness_profile: None,
            seed: 0,
            weights: SoftWeights::default(),
            restarts: 16,
            local_search_steps: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplingError {
    #[error("invalid constraints: {0}")]
    InvalidConstraints(String),
    #[error("infeasible constraints: {filter} leaves {available} candidate records, {target} needed")]
    InfeasibleConstraints {
        filter: &'static str,
        available: usize,
        target: usize,
    },
    #[error("correctness profile needs a prior run covering record {0}")]
    MissingPriorPrediction(String),
}

impl SamplingConstraints {
    pub fn validate(&self) -> Result<(), SamplingError> {
        let bad = |m: &str| Err(SamplingError::InvalidConstraints(m.to_owned()));
        if self.target_size == 0 {
            return bad("target_size must be positive");
        }
        if self.max_per_project == 0 {
            return bad("max_per_project must be at least 1");
        }
        let w = &self.weights;
        if [w.source, w.modelled, w.correctness, w.generator_diversity]
            .iter()
            .any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return bad("weights must be finite and non-negative");
        }
        if let Some(p) = &self.llm_correctness_profile {
            for (k, v) in p {
                if k != "correct" && k != "incorrect" {
                    return bad("correctness profile keys are 'correct' and 'incorrect'");
                }
                if !(0.0..=1.0).contains(v) {
                    return bad("correctness fractions must lie in [0, 1]");
                }
            }
        }
        Ok(())
    }

    fn correct_fraction(&self) -> Option<f64> {
        let p = self.llm_correctness_profile.as_ref()?;
        match (p.get("correct"), p.get("incorrect")) {
            (Some(c), _) => Some(*c),
            (None, Some(i)) => Some(1.0 - i),
            (None, None) => None,
        }
    }
}

/// Counts describing a selection, reported next to the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub size: usize,
    pub human_curated: usize,
    pub llm_generated: usize,
    pub modelled: usize,
    pub not_modelled: usize,
    pub complex: usize,
    pub projects: BTreeMap<String, usize>,
    pub prior_correct: Option<usize>,
    pub violation: f64,
}

#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub corpus: Corpus,
    pub summary: SampleSummary,
}

/// Per-candidate facts the search needs.
struct Cand<'a> {
    record: &'a CqRecord,
    project: usize,
    llm: bool,
    modelled: bool,
    prior_correct: Option<bool>,
}

/// Records passing the hard filters, or the name of the filter that left
/// fewer than `target_size`.
fn hard_filter<'a>(corpus: &'a Corpus, c: &SamplingConstraints) -> Result<Vec<&'a CqRecord>, SamplingError> {
    let mut pool: Vec<&CqRecord> = corpus.records.iter().collect();
    let check = |pool: &Vec<&CqRecord>, filter: &'static str| {
        if pool.len() < c.target_size {
            Err(SamplingError::InfeasibleConstraints {
                filter,
                available: pool.len(),
                target: c.target_size,
            })
        } else {
            Ok(())
        }
    };
    check(&pool, "target_size")?;
    if c.exclude_no_minor {
        pool.retain(|r| r.gold != GoldLabel::NoMinor);
        check(&pool, "exclude_no_minor")?;
    }
    if c.complex_only {
        pool.retain(|r| r.difficulty == Difficulty::Complex);
        check(&pool, "complex_only")?;
    }
    let mut per_project: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &pool {
        *per_project.entry(r.project.as_str()).or_default() += 1;
    }
    let capacity: usize = per_project.values().map(|n| (*n).min(c.max_per_project)).sum();
    if capacity < c.target_size {
        return Err(SamplingError::InfeasibleConstraints {
            filter: "max_per_project",
            available: capacity,
            target: c.target_size,
        });
    }
    Ok(pool)
}

struct Scorer<'c> {
    c: &'c SamplingConstraints,
    correct_target: Option<f64>,
}

impl Scorer<'_> {
    fn violation(&self, cands: &[Cand], sel: &[usize]) -> f64 {
        let n = sel.len();
        let llm = sel.iter().filter(|&&i| cands[i].llm).count();
        let modelled = sel.iter().filter(|&&i| cands[i].modelled).count();
        let excess = |a: usize, b: usize, tol: usize| (a.abs_diff(b).saturating_sub(tol)) as f64;
        let w = &self.c.weights;
        let mut v = w.source * excess(llm, n - llm, self.c.balance_source)
            + w.modelled * excess(modelled, n - modelled, self.c.balance_modelled);
        if let Some(f) = self.correct_target {
            let correct = sel.iter().filter(|&&i| cands[i].prior_correct == Some(true)).count();
            let target = (f * n as f64).round() as usize;
            v += w.correctness * correct.abs_diff(target) as f64;
        }
        let mut generators: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in sel {
            if let Some(g) = cands[i].record.generator_model.as_deref() {
                *generators.entry(g).or_default() += 1;
            }
        }
        let duplicates: usize = generators.values().map(|k| k - 1).sum();
        // Diversity is a tie-breaker: keep it below one unit of the others.
        v + w.generator_diversity * duplicates as f64 / (n as f64 + 1.0)
    }
}

/// Draw a subset that satisfies the hard filters and minimises soft-target
/// violations. Deterministic for a given seed; `prior` is needed only with a
/// correctness profile.
pub fn sample_small(
    corpus: &Corpus,
    c: &SamplingConstraints,
    prior: Option<&[Prediction]>,
) -> Result<SampleOutcome, SamplingError> {
    c.validate()?;
    let pool = hard_filter(corpus, c)?;
    let correct_target = c.correct_fraction();
    let prior_by_id: BTreeMap<&str, PredictedLabel> = prior
        .unwrap_or_default()
        .iter()
        .map(|p| (p.record_id.as_str(), p.label))
        .collect();
    let projects: Vec<&str> = pool
        .iter()
        .map(|r| r.project.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut cands = Vec::with_capacity(pool.len());
    for r in pool {
        let prior_correct = match prior_by_id.get(r.id.as_str()) {
            Some(p) => Some(*p == PredictedLabel::from(r.normalized_gold())),
            None if correct_target.is_some() => {
                return Err(SamplingError::MissingPriorPrediction(r.id.clone()))
            }
            None => None,
        };
        cands.push(Cand {
            record: r,
            project: projects.binary_search(&r.project.as_str()).expect("project indexed"),
            llm: r.source == Source::LlmGenerated,
            modelled: r.normalized_gold() == Label::Yes,
            prior_correct,
        });
    }
    let scorer = Scorer { c, correct_target };
    let restarts = c.restarts.max(1);
    let best = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            rng.set_stream(k as u64);
            let sel = search(&cands, projects.len(), c, &scorer, &mut rng);
            let v = scorer.violation(&cands, &sel);
            (v, k, sel)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("at least one restart");
    let (violation, _, sel) = best;
    let chosen: BTreeSet<&str> = sel.iter().map(|&i| cands[i].record.id.as_str()).collect();
    let sub = corpus.subset(chosen.iter().copied());
    let mut projects_count: BTreeMap<String, usize> = BTreeMap::new();
    for r in &sub.records {
        *projects_count.entry(r.project.clone()).or_default() += 1;
    }
    let modelled = sub.records.iter().filter(|r| r.normalized_gold() == Label::Yes).count();
    let llm = sub.records.iter().filter(|r| r.source == Source::LlmGenerated).count();
    let summary = SampleSummary {
        size: sub.len(),
        human_curated: sub.len() - llm,
        llm_generated: llm,
        modelled,
        not_modelled: sub.len() - modelled,
        complex: sub.records.iter().filter(|r| r.difficulty == Difficulty::Complex).count(),
        projects: projects_count,
        prior_correct: correct_target.map(|_| sel.iter().filter(|&&i| cands[i].prior_correct == Some(true)).count()),
        violation,
    };
    Ok(SampleOutcome { corpus: sub, summary })
}

/// One restart: random greedy fill under the project cap, then swaps that do
/// not increase the violation.
fn search(cands: &[Cand], n_projects: usize, c: &SamplingConstraints, scorer: &Scorer, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.shuffle(rng);
    let mut per_project = vec![0usize; n_projects];
    let mut in_sel = vec![false; cands.len()];
    let mut sel = Vec::with_capacity(c.target_size);
    for &i in &order {
        if sel.len() == c.target_size {
            break;
        }
        if per_project[cands[i].project] < c.max_per_project {
            per_project[cands[i].project] += 1;
            in_sel[i] = true;
            sel.push(i);
        }
    }
    // The capacity check in hard_filter guarantees a full fill.
    debug_assert_eq!(sel.len(), c.target_size);
    let mut score = scorer.violation(cands, &sel);
    for _ in 0..c.local_search_steps {
        if score == 0.0 || sel.len() == cands.len() {
            break;
        }
        let slot = rng.random_range(0..sel.len());
        let incoming = rng.random_range(0..cands.len());
        if in_sel[incoming] {
            continue;
        }
        let outgoing = sel[slot];
        let (pi, po) = (cands[incoming].project, cands[outgoing].project);
        if pi != po && per_project[pi] >= c.max_per_project {
            continue;
        }
        sel[slot] = incoming;
        let candidate = scorer.violation(cands, &sel);
        if candidate <= score {
            score = candidate;
            in_sel[outgoing] = false;
            in_sel[incoming] = true;
            per_project[po] -= 1;
            per_project[pi] += 1;
        } else {
            sel[slot] = outgoing;
        }
    }
    sel.sort_unstable();
    sel
}

pub const MAX_SUMMARY_CHARS: usize = 300;
pub const CONDENSE_TEMPLATE: &str = include_str!("../templates/condense_prompt.txt");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CondenseError {
    #[error("story is empty")]
    EmptyStory,
    #[error("model returned an empty summary")]
    EmptySummary,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Collapse a completion to one line of at most [`MAX_SUMMARY_CHARS`]
/// characters, cutting at a word boundary when possible.
pub fn to_single_line(text: &str) -> String {
    let text = text.trim();
    let text = text
        .strip_prefix("Summary:")
        .or_else(|| text.strip_prefix("summary:"))
        .unwrap_or(text);
    let joined = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if joined.chars().count() <= MAX_SUMMARY_CHARS {
        return joined;
    }
    let cut: String = joined.chars().take(MAX_SUMMARY_CHARS).collect();
    match cut.rfind(' ') {
        Some(sp) if sp > MAX_SUMMARY_CHARS / 2 => cut[..sp].trim_end().to_owned(),
        _ => cut,
    }
}

/// One-line summary of an ontology story, produced by `backend`.
pub fn condense_story(story: &str, cfg: &ModelConfig, backend: &dyn Backend) -> Result<String, CondenseError> {
    condense_story_cached(story, cfg, backend, &CompletionCache::new())
}

pub fn condense_story_cached(
    story: &str,
    cfg: &ModelConfig,
    backend: &dyn Backend,
    cache: &CompletionCache,
) -> Result<String, CondenseError> {
    if story.trim().is_empty() {
        return Err(CondenseError::EmptyStory);
    }
    let prompt = CONDENSE_TEMPLATE.replace("{story}", story.trim());
    let (text, _) = request_judgment(&prompt, cfg, backend, cache, 1)?;
    let line = to_single_line(&text);
    if line.is_empty() {
        return Err(CondenseError::EmptySummary);
    }
    Ok(line)
}

/// Fill `story_oneline` for every record that lacks one. Stories shared by
/// several records are summarised once.
pub fn condense_corpus(corpus: &mut Corpus, cfg: &ModelConfig, backend: &dyn Backend) -> Result<usize, CondenseError> {
    let cache = CompletionCache::new();
    let mut filled = 0;
    for r in corpus.records.iter_mut().filter(|r| r.story_oneline.is_none()) {
        r.story_oneline = Some(condense_story_cached(&r.story_text, cfg, backend, &cache)?);
        filled += 1;
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::StubBackend;
    use proptest::prelude::*;

    fn rec(i: usize, gold: GoldLabel, difficulty: Difficulty, source: Source, project: &str) -> CqRecord {
        CqRecord {
            id: format!("r{i:04}"),
            cq_text: format!("q{i}"),
            story_text: "s".into(),
            story_oneline: None,
            ontology_ref: "o".into(),
            gold,
            difficulty,
            source,
            project: project.into(),
            generator_model: (source == Source::LlmGenerated).then(|| format!("gen{}", i % 3)),
            formalization: None,
        }
    }

    /// 12 projects × 6 records, mixed labels and sources, all complex.
    fn suitable() -> Corpus {
        let mut rs = Vec::new();
        for p in 0..12 {
            for k in 0..6 {
                let i = p * 6 + k;
                let gold = [GoldLabel::Yes, GoldLabel::No, GoldLabel::NoMinor][k % 3];
                let source = if k < 3 { Source::HumanCurated } else { Source::LlmGenerated };
                rs.push(rec(i, gold, Difficulty::Complex, source, &format!("proj{p}")));
            }
        }
        Corpus::from_records(rs).unwrap()
    }

    #[test]
    fn small_set_constraints() {
        let c = SamplingConstraints::default();
        let out = sample_small(&suitable(), &c, None).unwrap();
        let s = &out.summary;
        assert_eq!(s.size, 20);
        assert_eq!(s.modelled, 10);
        assert_eq!(s.complex, 20);
        assert_eq!(s.llm_generated, 10);
        assert!(s.projects.values().all(|&n| n <= 3));
        assert!(out.corpus.records.iter().all(|r| r.gold != GoldLabel::NoMinor));
        assert_eq!(s.violation.floor(), 0.0);
    }

    #[test]
    fn no_complex_records() {
        let rs = (0..30)
            .map(|i| rec(i, GoldLabel::Yes, Difficulty::Simple, Source::HumanCurated, &format!("p{}", i % 10)))
            .collect();
        let err = sample_small(&Corpus::from_records(rs).unwrap(), &SamplingConstraints::default(), None).unwrap_err();
        assert!(matches!(err, SamplingError::InfeasibleConstraints { filter: "complex_only", .. }), "{err}");
    }

    #[test]
    fn project_cap_can_exhaust_pool() {
        let rs = (0..30)
            .map(|i| rec(i, GoldLabel::Yes, Difficulty::Complex, Source::HumanCurated, &format!("p{}", i % 4)))
            .collect();
        let err = sample_small(&Corpus::from_records(rs).unwrap(), &SamplingConstraints::default(), None).unwrap_err();
        assert!(matches!(err, SamplingError::InfeasibleConstraints { filter: "max_per_project", available: 12, .. }));
    }

    #[test]
    fn same_seed_same_subset() {
        let c = SamplingConstraints { seed: 7, ..Default::default() };
        let a = sample_small(&suitable(), &c, None).unwrap();
        let b = sample_small(&suitable(), &c, None).unwrap();
        let ids = |o: &SampleOutcome| o.corpus.records.iter().map(|r| r.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
    }

    #[test]
    fn correctness_profile_is_matched() {
        let corpus = suitable();
        // Prior run: wrong on every fourth record.
        let prior: Vec<Prediction> = corpus
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let g = r.normalized_gold();
                Prediction::new(&r.id, if i % 4 != 3 { g } else { g.flip() })
            })
            .collect();
        let c = SamplingConstraints {
            llm_correctness_profile: Some([("correct".to_owned(), 0.75)].into()),
            ..Default::default()
        };
        let out = sample_small(&corpus, &c, Some(&prior)).unwrap();
        assert_eq!(out.summary.prior_correct, Some(15));
        assert!(matches!(
            sample_small(&corpus, &c, None),
            Err(SamplingError::MissingPriorPrediction(_))
        ));
    }

    #[test]
    fn constraints_file_shape() {
        let c: SamplingConstraints = serde_json::from_str(
            r#"{"target_size": 20, "max_per_project": 3, "complex_only": true, "balance_modelled": 0, "seed": 42}"#,
        )
        .unwrap();
        assert_eq!(c.seed, 42);
        assert!(serde_json::from_str::<SamplingConstraints>(r#"{"target": 3}"#).is_err());
    }

    #[test]
    fn condense_with_stub() {
        let stub = StubBackend::fixed("A musician tracks organ repairs.");
        let cfg = ModelConfig::default();
        assert_eq!(condense_story("Long story.\n\nMore.", &cfg, &stub).unwrap(), "A musician tracks organ repairs.");
        assert_eq!(condense_story("  ", &cfg, &stub), Err(CondenseError::EmptyStory));
    }

    #[test]
    fn single_line_and_length() {
        let long = format!("Summary: first line\nsecond {}", "word ".repeat(100));
        let s = to_single_line(&long);
        assert!(!s.contains('\n'));
        assert!(s.chars().count() <= MAX_SUMMARY_CHARS);
        assert!(s.starts_with("first line second"));
    }

    fn arb_corpus() -> impl Strategy<Value = Vec<CqRecord>> {
        prop::collection::vec((0u8..3, any::<bool>(), any::<bool>(), 0u8..8), 20..80).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (g, complex, llm, p))| {
                    rec(
                        i,
                        [GoldLabel::Yes, GoldLabel::No, GoldLabel::NoMinor][g as usize],
                        if complex { Difficulty::Complex } else { Difficulty::Simple },
                        if llm { Source::LlmGenerated } else { Source::HumanCurated },
                        &format!("p{p}"),
                    )
                })
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn hard_filters_always_hold(rs in arb_corpus(), size in 1usize..12, cap in 1usize..4, seed in any::<u64>()) {
            let corpus = Corpus::from_records(rs).unwrap();
            let c = SamplingConstraints {
                target_size: size,
                max_per_project: cap,
                balance_source: 2,
                balance_modelled: 2,
                seed,
                restarts: 4,
                local_search_steps: 100,
                ..Default::default()
            };
            match sample_small(&corpus, &c, None) {
                Ok(out) => {
                    prop_assert_eq!(out.corpus.len(), size);
                    let mut per: BTreeMap<&str, usize> = BTreeMap::new();
                    for r in &out.corpus.records {
                        prop_assert!(r.gold != GoldLabel::NoMinor);
                        prop_assert_eq!(r.difficulty, Difficulty::Complex);
                        *per.entry(r.project.as_str()).or_default() += 1;
                    }
                    prop_assert!(per.values().all(|&n| n <= cap));
                }
                Err(SamplingError::InfeasibleConstraints { .. }) => {}
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }
    }
}

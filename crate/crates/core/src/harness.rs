//! Scoring of automatic-evaluation runs against gold labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CqRecord, Label};
use crate::judge::{JudgeOutcome, JudgeResult};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("record {0} has no prediction")]
    MissingPrediction(String),
    #[error("record {0} has more than one prediction")]
    DuplicatePrediction(String),
    #[error("nothing to score")]
    EmptyInput,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    RunFile {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictedLabel {
    Yes,
    No,
    /// No usable answer; always scored as wrong.
    Failure,
}

impl From<Label> for PredictedLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Yes => PredictedLabel::Yes,
            Label::No => PredictedLabel::No,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub record_id: String,
    pub label: PredictedLabel,
    /// Reason recorded with a failure, if any.
    pub failure: Option<String>,
}

impl Prediction {
    pub fn new(record_id: impl Into<String>, label: Label) -> Self {
        Self {
            record_id: record_id.into(),
            label: label.into(),
            failure: None,
        }
    }

    pub fn failure(record_id: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            record_id: record_id.into(),
            label: PredictedLabel::Failure,
            failure: Some(reason.into()),
        }
    }
}

/// One line of a run file: `{"record_id", "label"}` or `{"record_id", "failure"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunLine {
    record_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    failure: Option<String>,
}

pub fn predictions_from_results(results: &[JudgeResult]) -> Vec<Prediction> {
    results
        .iter()
        .map(|r| match &r.outcome {
            JudgeOutcome::Suggestion(s) => Prediction::new(&r.record_id, s.label),
            JudgeOutcome::Failure(f) => Prediction::failure(&r.record_id, f.to_string()),
        })
        .collect()
}

pub fn render_run(preds: &[Prediction]) -> String {
    let mut out = String::new();
    for p in preds {
        let line = match p.label {
            PredictedLabel::Yes => RunLine { record_id: p.record_id.clone(), label: Some(Label::Yes), failure: None },
            PredictedLabel::No => RunLine { record_id: p.record_id.clone(), label: Some(Label::No), failure: None },
            PredictedLabel::Failure => RunLine {
                record_id: p.record_id.clone(),
                label: None,
                failure: Some(p.failure.clone().unwrap_or_else(|| "failure".to_owned())),
            },
        };
        out.push_str(&serde_json::to_string(&line).expect("run line serializes"));
        out.push('\n');
    }
    out
}

pub fn write_run_file(path: &Path, preds: &[Prediction]) -> Result<(), HarnessError> {
    let mut f = fs::File::create(path).map_err(|source| HarnessError::Io { path: path.to_owned(), source })?;
    f.write_all(render_run(preds).as_bytes())
        .map_err(|source| HarnessError::Io { path: path.to_owned(), source })
}

pub fn read_run_file(path: &Path) -> Result<Vec<Prediction>, HarnessError> {
    let f = fs::File::open(path).map_err(|source| HarnessError::Io { path: path.to_owned(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|source| HarnessError::Io { path: path.to_owned(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| HarnessError::RunFile { path: path.to_owned(), line: i + 1, message };
        let rl: RunLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let p = match (rl.label, rl.failure) {
            (Some(l), None) => Prediction::new(rl.record_id, l),
            (None, Some(f)) => Prediction::failure(rl.record_id, f),
            _ => return Err(bad("exactly one of label or failure is required".to_owned())),
        };
        out.push(p);
    }
    Ok(out)
}

/// Gold rows, predicted columns. A failure lands in the wrong column for its
/// gold class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub yes_yes: usize,
    pub yes_no: usize,
    pub no_yes: usize,
    pub no_no: usize,
}

impl Confusion {
    pub fn add(&mut self, gold: Label, predicted: PredictedLabel) {
        match (gold, predicted) {
            (Label::Yes, PredictedLabel::Yes) => self.yes_yes += 1,
            (Label::Yes, _) => self.yes_no += 1,
            (Label::No, PredictedLabel::No) => self.no_no += 1,
            (Label::No, _) => self.no_yes += 1,
        }
    }

    pub fn n(&self) -> usize {
        self.yes_yes + self.yes_no + self.no_yes + self.no_no
    }

    pub fn correct(&self) -> usize {
        self.yes_yes + self.no_no
    }

    pub fn accuracy(&self) -> f64 {
        if self.n() == 0 {
            0.0
        } else {
            self.correct() as f64 / self.n() as f64
        }
    }

    /// Swap the roles of Yes and No.
    pub fn transposed_labels(&self) -> Self {
        Self {
            yes_yes: self.no_no,
            yes_no: self.no_yes,
            no_yes: self.yes_no,
            no_no: self.yes_yes,
        }
    }

    /// (tp, fp, fn) for `class`.
    fn counts(&self, class: Label) -> (usize, usize, usize) {
        match class {
            Label::Yes => (self.yes_yes, self.no_yes, self.yes_no),
            Label::No => (self.no_no, self.yes_no, self.no_yes),
        }
    }

    /// Whether `class` occurs among gold labels or predictions.
    pub fn class_present(&self, class: Label) -> bool {
        let (tp, fp, fn_) = self.counts(class);
        tp + fp + fn_ > 0
    }

    pub fn f1(&self, class: Label) -> f64 {
        let (tp, fp, fn_) = self.counts(class);
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Mean F1 over the classes that occur in gold or predictions.
    pub fn macro_f1(&self) -> f64 {
        let present: Vec<Label> = Label::ALL.into_iter().filter(|&c| self.class_present(c)).collect();
        if present.is_empty() {
            return 0.0;
        }
        present.iter().map(|&c| self.f1(c)).sum::<f64>() / present.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub macro_f1: f64,
    pub accuracy: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: BTreeMap<Label, f64>,
    pub confusion: Confusion,
    pub failures: usize,
    /// Scores per record source (`human`, `llm`).
    pub breakdowns: BTreeMap<String, GroupScore>,
}

impl MetricsReport {
    fn from_confusion(confusion: Confusion, failures: usize) -> Self {
        Self {
            n: confusion.n(),
            accuracy: confusion.accuracy(),
            macro_f1: confusion.macro_f1(),
            per_class_f1: Label::ALL
                .into_iter()
                .filter(|&c| confusion.class_present(c))
                .map(|c| (c, confusion.f1(c)))
                .collect(),
            confusion,
            failures,
            breakdowns: BTreeMap::new(),
        }
    }

    pub fn group_score(&self) -> GroupScore {
        GroupScore {
            macro_f1: self.macro_f1,
            accuracy: self.accuracy,
            n: self.n,
        }
    }
}

fn index_predictions(preds: &[Prediction]) -> Result<BTreeMap<&str, &Prediction>, HarnessError> {
    let mut by_id = BTreeMap::new();
    for p in preds {
        if by_id.insert(p.record_id.as_str(), p).is_some() {
            return Err(HarnessError::DuplicatePrediction(p.record_id.clone()));
        }
    }
    Ok(by_id)
}

fn score_records<'a>(
    records: impl IntoIterator<Item = &'a CqRecord>,
    by_id: &BTreeMap<&str, &Prediction>,
) -> Result<MetricsReport, HarnessError> {
    let mut confusion = Confusion::default();
    let mut failures = 0;
    for r in records {
        let p = by_id
            .get(r.id.as_str())
            .ok_or_else(|| HarnessError::MissingPrediction(r.id.clone()))?;
        if p.label == PredictedLabel::Failure {
            failures += 1;
        }
        confusion.add(r.normalized_gold(), p.label);
    }
    if confusion.n() == 0 {
        return Err(HarnessError::EmptyInput);
    }
    Ok(MetricsReport::from_confusion(confusion, failures))
}

/// Score every record of `corpus`. Predictions for records outside the corpus
/// are ignored, so a full-corpus run can be scored on a subset.
pub fn score_run(preds: &[Prediction], corpus: &Corpus) -> Result<MetricsReport, HarnessError> {
    let by_id = index_predictions(preds)?;
    let mut report = score_records(&corpus.records, &by_id)?;
    for (group, r) in breakdown_indexed(&by_id, corpus, Grouping::Source)? {
        report.breakdowns.insert(group, r.group_score());
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Source,
    Project,
}

fn breakdown_indexed(
    by_id: &BTreeMap<&str, &Prediction>,
    corpus: &Corpus,
    grouping: Grouping,
) -> Result<BTreeMap<String, MetricsReport>, HarnessError> {
    let mut groups: BTreeMap<String, Vec<&CqRecord>> = BTreeMap::new();
    for r in &corpus.records {
        let key = match grouping {
            Grouping::Source => r.source.to_string(),
            Grouping::Project => r.project.clone(),
        };
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(k, rs)| Ok((k, score_records(rs, by_id)?)))
        .collect()
}

/// Score each source or project group on its own. Empty groups do not appear.
pub fn breakdown_by_source(
    preds: &[Prediction],
    corpus: &Corpus,
    grouping: Grouping,
) -> Result<BTreeMap<String, MetricsReport>, HarnessError> {
    breakdown_indexed(&index_predictions(preds)?, corpus, grouping)
}

/// Mean and sample standard deviation; `std` is absent for a single value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: Option<f64>,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() > 1).then(|| {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        });
        Some(Self { mean, std })
    }
}

/// Two decimals, with `± std` when there is more than one run.
impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.mean)?;
        if let Some(s) = self.std {
            write!(f, " ± {:.2}", s)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub accuracy: MeanStd,
    pub macro_f1: MeanStd,
    pub per_class_f1: BTreeMap<Label, MeanStd>,
    /// Per source group; only groups present in every run.
    pub breakdowns: BTreeMap<String, AggregateGroup>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateGroup {
    pub macro_f1: MeanStd,
    pub accuracy: MeanStd,
}

pub fn aggregate_runs(reports: &[MetricsReport]) -> Result<AggregateReport, HarnessError> {
    let pick = |f: &dyn Fn(&MetricsReport) -> f64| -> MeanStd {
        MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>()).expect("non-empty")
    };
    if reports.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let mut per_class_f1 = BTreeMap::new();
    for c in Label::ALL {
        let vals: Vec<f64> = reports.iter().filter_map(|r| r.per_class_f1.get(&c).copied()).collect();
        if vals.len() == reports.len() {
            per_class_f1.insert(c, MeanStd::of(&vals).expect("non-empty"));
        }
    }
    let groups: BTreeSet<&String> = reports.iter().flat_map(|r| r.breakdowns.keys()).collect();
    let mut breakdowns = BTreeMap::new();
    for g in groups {
        let scores: Vec<&GroupScore> = reports.iter().filter_map(|r| r.breakdowns.get(g)).collect();
        if scores.len() == reports.len() {
            breakdowns.insert(
                g.clone(),
                AggregateGroup {
                    macro_f1: MeanStd::of(&scores.iter().map(|s| s.macro_f1).collect::<Vec<_>>()).expect("non-empty"),
                    accuracy: MeanStd::of(&scores.iter().map(|s| s.accuracy).collect::<Vec<_>>()).expect("non-empty"),
                },
            );
        }
    }
    Ok(AggregateReport {
        runs: reports.len(),
        accuracy: pick(&|r| r.accuracy),
        macro_f1: pick(&|r| r.macro_f1),
        per_class_f1,
        breakdowns,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedScores {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: BTreeMap<Label, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub monte_carlo: ExpectedScores,
    pub closed_form: ExpectedScores,
}

/// Closed form for uniform random guessing. A class with prevalence `p` gets
/// expected precision `p` and recall 0.5, hence F1 `p / (p + 0.5)`.
pub fn closed_form_baseline(n_yes: usize, n_no: usize) -> ExpectedScores {
    let n = (n_yes + n_no) as f64;
    let mut per_class_f1 = BTreeMap::new();
    for (c, k) in [(Label::Yes, n_yes), (Label::No, n_no)] {
        if k > 0 {
            let p = k as f64 / n;
            per_class_f1.insert(c, p / (p + 0.5));
        }
    }
    let macro_f1 = if per_class_f1.is_empty() {
        0.0
    } else {
        per_class_f1.values().sum::<f64>() / per_class_f1.len() as f64
    };
    ExpectedScores {
        accuracy: 0.5,
        macro_f1,
        per_class_f1,
    }
}

/// Number of set bits in `n` fresh random bits.
fn random_hits(rng: &mut ChaCha8Rng, mut n: usize) -> usize {
    let mut hits = 0;
    while n >= 64 {
        hits += rng.next_u64().count_ones() as usize;
        n -= 64;
    }
    if n > 0 {
        hits += (rng.next_u64() & ((1u64 << n) - 1)).count_ones() as usize;
    }
    hits
}

/// Uniform-random Yes/No predictions, averaged over `trials`, next to the
/// closed-form expectation.
pub fn random_baseline(corpus: &Corpus, trials: usize, seed: u64) -> Result<BaselineReport, HarnessError> {
    let n_yes = corpus.records.iter().filter(|r| r.normalized_gold() == Label::Yes).count();
    let n_no = corpus.records.len() - n_yes;
    random_baseline_counts(n_yes, n_no, trials, seed)
}

/// [`random_baseline`] from class counts alone.
pub fn random_baseline_counts(n_yes: usize, n_no: usize, trials: usize, seed: u64) -> Result<BaselineReport, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    if n_yes + n_no == 0 {
        return Err(HarnessError::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    let mut macro_f1 = 0.0;
    let mut per_class: BTreeMap<Label, f64> = BTreeMap::new();
    for _ in 0..trials {
        // Each gold-Yes record is predicted Yes with probability 1/2, and
        // likewise each gold-No record is predicted No.
        let yes_hits = random_hits(&mut rng, n_yes);
        let no_hits = random_hits(&mut rng, n_no);
        let c = Confusion {
            yes_yes: yes_hits,
            yes_no: n_yes - yes_hits,
            no_yes: n_no - no_hits,
            no_no: no_hits,
        };
        acc += c.accuracy();
        macro_f1 += c.macro_f1();
        for cls in Label::ALL {
            if c.class_present(cls) {
                *per_class.entry(cls).or_default() += c.f1(cls);
            }
        }
    }
    let t = trials as f64;
    Ok(BaselineReport {
        n: n_yes + n_no,
        trials,
        seed,
        monte_carlo: ExpectedScores {
            accuracy: acc / t,
            macro_f1: macro_f1 / t,
            per_class_f1: per_class.into_iter().map(|(k, v)| (k, v / t)).collect(),
        },
        closed_form: closed_form_baseline(n_yes, n_no),
    })
}

/// One model row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub human_macro_f1: Option<MeanStd>,
    pub llm_macro_f1: Option<MeanStd>,
    pub all_macro_f1: Option<MeanStd>,
    pub small_accuracy: Option<MeanStd>,
}

impl TableRow {
    /// Row from aggregated full-corpus runs and, optionally, small-set runs.
    pub fn from_aggregates(model: impl Into<String>, full: Option<&AggregateReport>, small: Option<&AggregateReport>) -> Self {
        let group = |g: &str| full.and_then(|a| a.breakdowns.get(g)).map(|x| x.macro_f1);
        Self {
            model: model.into(),
            human_macro_f1: group("human"),
            llm_macro_f1: group("llm"),
            all_macro_f1: full.map(|a| a.macro_f1),
            small_accuracy: small.map(|a| a.accuracy),
        }
    }
}

/// Plain-text table: macro-F1 on the full corpus (human-curated, LLM
/// generated, all) and accuracy on the small set.
pub fn render_table(rows: &[TableRow]) -> String {
    let cell = |v: &Option<MeanStd>| v.map_or_else(|| "-".to_owned(), |m| m.to_string());
    let header = ["Model", "Human-curated F1", "LLM generated F1", "All F1", "Small-set accuracy"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                cell(&r.human_macro_f1),
                cell(&r.llm_macro_f1),
                cell(&r.all_macro_f1),
                cell(&r.small_accuracy),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header.map(str::to_owned));
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for row in &body {
        line(&mut out, row);
    }
    out
}

/// Row for the random baseline.
pub fn baseline_row(full: &Corpus, small: Option<&Corpus>) -> TableRow {
    let cf = |c: &Corpus| {
        let y = c.records.iter().filter(|r| r.normalized_gold() == Label::Yes).count();
        closed_form_baseline(y, c.records.len() - y)
    };
    let group = |src: &str| {
        let sub: Vec<&CqRecord> = full.records.iter().filter(|r| r.source.to_string() == src).collect();
        if sub.is_empty() {
            return None;
        }
        let y = sub.iter().filter(|r| r.normalized_gold() == Label::Yes).count();
        Some(MeanStd { mean: closed_form_baseline(y, sub.len() - y).macro_f1, std: None })
    };
    TableRow {
        model: "Random baseline".to_owned(),
        human_macro_f1: group("human"),
        llm_macro_f1: group("llm"),
        all_macro_f1: (!full.is_empty()).then(|| MeanStd { mean: cf(full).macro_f1, std: None }),
        small_accuracy: small.map(|_| MeanStd { mean: 0.5, std: None }),
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "macro-F1 = {:.2}", self.macro_f1)?;
        writeln!(f, "accuracy = {:.2}", self.accuracy)?;
        for (c, v) in &self.per_class_f1 {
            writeln!(f, "F1({c}) = {v:.2}")?;
        }
        let c = &self.confusion;
        writeln!(f, "confusion (gold x predicted): yes/yes {} yes/no {} no/yes {} no/no {}", c.yes_yes, c.yes_no, c.no_yes, c.no_no)?;
        if self.failures > 0 {
            writeln!(f, "failures = {} (scored as wrong)", self.failures)?;
        }
        for (g, s) in &self.breakdowns {
            writeln!(f, "[{g}] n = {} macro-F1 = {:.2} accuracy = {:.2}", s.n, s.macro_f1, s.accuracy)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Difficulty, GoldLabel, Source};
    use proptest::prelude::*;

    fn rec(id: &str, gold: GoldLabel, source: Source, project: &str) -> CqRecord {
        CqRecord {
            id: id.into(),
            cq_text: "q".into(),
            story_text: "s".into(),
            story_oneline: None,
            ontology_ref: "o".into(),
            gold,
            difficulty: Difficulty::Unrated,
            source,
            project: project.into(),
            generator_model: (source == Source::LlmGenerated).then(|| "m".into()),
            formalization: None,
        }
    }

    fn corpus(records: Vec<CqRecord>) -> Corpus {
        Corpus::from_records(records).unwrap()
    }

    fn perfect(c: &Corpus) -> Vec<Prediction> {
        c.records.iter().map(|r| Prediction::new(&r.id, r.normalized_gold())).collect()
    }

    #[test]
    fn perfect_predictions() {
        let c = corpus(vec![
            rec("a", GoldLabel::Yes, Source::HumanCurated, "p"),
            rec("b", GoldLabel::NoMinor, Source::LlmGenerated, "p"),
        ]);
        let r = score_run(&perfect(&c), &c).unwrap();
        assert_eq!((r.macro_f1, r.accuracy), (1.0, 1.0));
        assert_eq!(r.breakdowns["human"].macro_f1, 1.0);
        assert_eq!(r.breakdowns["llm"].macro_f1, 1.0);
    }

    #[test]
    fn all_yes_on_imbalanced_counts() {
        let c = Confusion { yes_yes: 1204, yes_no: 0, no_yes: 189, no_no: 0 };
        let acc = 1204.0 / 1393.0;
        assert!((c.accuracy() - acc).abs() < 1e-12);
        assert_eq!(c.f1(Label::No), 0.0);
        let f1_yes = 2.0 * acc / (acc + 1.0);
        assert!((c.f1(Label::Yes) - f1_yes).abs() < 1e-12);
        assert!((c.macro_f1() - f1_yes / 2.0).abs() < 1e-12);
    }

    #[test]
    fn failure_counts_as_wrong() {
        let c = corpus(vec![
            rec("a", GoldLabel::Yes, Source::HumanCurated, "p"),
            rec("b", GoldLabel::No, Source::HumanCurated, "p"),
        ]);
        let preds = vec![Prediction::failure("a", "x"), Prediction::failure("b", "x")];
        let r = score_run(&preds, &c).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.confusion, Confusion { yes_yes: 0, yes_no: 1, no_yes: 1, no_no: 0 });
        assert_eq!(r.failures, 2);
    }

    #[test]
    fn missing_and_duplicate_predictions() {
        let c = corpus(vec![rec("a", GoldLabel::Yes, Source::HumanCurated, "p")]);
        assert!(matches!(score_run(&[], &c), Err(HarnessError::MissingPrediction(id)) if id == "a"));
        let dup = vec![Prediction::new("a", Label::Yes), Prediction::new("a", Label::No)];
        assert!(matches!(score_run(&dup, &c), Err(HarnessError::DuplicatePrediction(_))));
    }

    #[test]
    fn breakdown_wrong_on_human_only() {
        let c = corpus(vec![
            rec("h1", GoldLabel::Yes, Source::HumanCurated, "p1"),
            rec("h2", GoldLabel::No, Source::HumanCurated, "p2"),
            rec("l1", GoldLabel::Yes, Source::LlmGenerated, "p3"),
            rec("l2", GoldLabel::No, Source::LlmGenerated, "p3"),
        ]);
        let preds: Vec<Prediction> = c
            .records
            .iter()
            .map(|r| {
                let g = r.normalized_gold();
                Prediction::new(&r.id, if r.source == Source::HumanCurated { g.flip() } else { g })
            })
            .collect();
        let by_src = breakdown_by_source(&preds, &c, Grouping::Source).unwrap();
        assert_eq!(by_src["human"].accuracy, 0.0);
        assert_eq!(by_src["llm"].accuracy, 1.0);
        let by_proj = breakdown_by_source(&preds, &c, Grouping::Project).unwrap();
        assert_eq!(by_proj.len(), 3);
        assert_eq!(by_proj.values().map(|r| r.n).sum::<usize>(), 4);
    }

    #[test]
    fn aggregate_three_runs() {
        let mk = |acc: f64| MetricsReport {
            n: 100,
            accuracy: acc,
            macro_f1: acc,
            per_class_f1: BTreeMap::new(),
            confusion: Confusion::default(),
            failures: 0,
            breakdowns: BTreeMap::new(),
        };
        let a = aggregate_runs(&[mk(0.70), mk(0.72), mk(0.74)]).unwrap();
        assert!((a.accuracy.mean - 0.72).abs() < 1e-12);
        assert!((a.accuracy.std.unwrap() - 0.02).abs() < 1e-12);
        assert_eq!(a.accuracy.to_string(), "0.72 ± 0.02");
        let same = aggregate_runs(&[mk(0.5), mk(0.5), mk(0.5)]).unwrap();
        assert_eq!(same.accuracy.std, Some(0.0));
        let one = aggregate_runs(&[mk(0.5)]).unwrap();
        assert_eq!(one.accuracy.std, None);
        assert_eq!(one.accuracy.to_string(), "0.50");
        assert!(matches!(aggregate_runs(&[]), Err(HarnessError::EmptyInput)));
    }

    #[test]
    fn balanced_baseline() {
        let cf = closed_form_baseline(10, 10);
        assert_eq!(cf.accuracy, 0.5);
        assert_eq!(cf.per_class_f1[&Label::Yes], 0.5);
        assert_eq!(cf.macro_f1, 0.5);
    }

    #[test]
    fn run_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let preds = vec![Prediction::new("a", Label::Yes), Prediction::failure("b", "no label")];
        write_run_file(&path, &preds).unwrap();
        assert_eq!(read_run_file(&path).unwrap(), preds);
        fs::write(&path, "{\"record_id\":\"a\"}\n").unwrap();
        assert!(matches!(read_run_file(&path), Err(HarnessError::RunFile { line: 1, .. })));
    }

    #[test]
    fn table_rendering() {
        let rows = vec![TableRow {
            model: "m".into(),
            human_macro_f1: Some(MeanStd { mean: 0.51, std: Some(0.02) }),
            llm_macro_f1: None,
            all_macro_f1: Some(MeanStd { mean: 0.58, std: Some(0.01) }),
            small_accuracy: Some(MeanStd { mean: 0.75, std: None }),
        }];
        let t = render_table(&rows);
        assert!(t.contains("0.51 ± 0.02"));
        assert!(t.contains("0.75"));
        assert!(t.lines().nth(2).unwrap().contains(" - "));
    }

    fn arb_confusion() -> impl Strategy<Value = Confusion> {
        (0usize..30, 0usize..30, 0usize..30, 0usize..30)
            .prop_filter("non-empty", |(a, b, c, d)| a + b + c + d > 0)
            .prop_map(|(yes_yes, yes_no, no_yes, no_no)| Confusion { yes_yes, yes_no, no_yes, no_no })
    }

    proptest! {
        #[test]
        fn relabel_invariance(c in arb_confusion()) {
            prop_assert!((c.macro_f1() - c.transposed_labels().macro_f1()).abs() < 1e-12);
        }

        #[test]
        fn bounded_and_perfect_iff_diagonal(c in arb_confusion()) {
            let m = c.macro_f1();
            prop_assert!((0.0..=1.0).contains(&m));
            prop_assert!((0.0..=1.0).contains(&c.accuracy()));
            let diagonal = c.yes_no == 0 && c.no_yes == 0;
            prop_assert_eq!(m == 1.0, diagonal);
        }

        #[test]
        fn monte_carlo_close_to_closed_form(n_yes in 50usize..400, n_no in 50usize..400, seed in any::<u64>()) {
            let b = random_baseline_counts(n_yes, n_no, 2000, seed).unwrap();
            prop_assert!((b.monte_carlo.macro_f1 - b.closed_form.macro_f1).abs() <= 0.02);
            prop_assert!((b.monte_carlo.accuracy - 0.5).abs() <= 0.02);
        }
    }
}

//! Statistics over study event logs: per-user accuracy by condition, splits
//! by suggestion correctness, difficulty ratings, learning curve, and the
//! tests behind them (paired t, chi-square, Pearson, Cohen's d).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label};
use crate::study::{
    Answer, Condition, ConditionOrder, Expertise, Half, SessionPlan, StudyEvent, SusResponse, TaskResponse,
};

pub mod dist;
mod stats;

pub use stats::{
    chi_square_2x2, cohens_d, cohens_d_paired, mean, paired_t_test, pearson_r, sample_std, sample_variance,
    StatTestResult, StatsError,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("response for record {0}, which has no gold label")]
    UnknownRecord(String),
    #[error("record {0} was shown assisted but has no suggestion")]
    MissingSuggestion(String),
    #[error("event for session {0} precedes its creation")]
    OrphanEvent(String),
}

pub type GoldIndex = BTreeMap<String, Label>;

pub fn gold_labels(corpus: &Corpus) -> GoldIndex {
    corpus.records.iter().map(|r| (r.id.clone(), r.normalized_gold())).collect()
}

/// One session reassembled from the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionData {
    pub token: String,
    pub plan: SessionPlan,
    pub responses: Vec<TaskResponse>,
    pub survey: Option<SusResponse>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyData {
    pub sessions: Vec<SessionData>,
}

impl StudyData {
    pub fn from_events(events: &[StudyEvent]) -> Result<Self, AnalysisError> {
        let mut sessions: Vec<SessionData> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for e in events {
            match e {
                StudyEvent::SessionCreated { token, plan } => {
                    index.insert(token.clone(), sessions.len());
                    sessions.push(SessionData {
                        token: token.clone(),
                        plan: plan.clone(),
                        responses: Vec::new(),
                        survey: None,
                    });
                }
                StudyEvent::Response { token, response } => {
                    let i = *index.get(token).ok_or_else(|| AnalysisError::OrphanEvent(token.clone()))?;
                    sessions[i].responses.push(response.clone());
                }
                StudyEvent::Survey { token, survey } => {
                    let i = *index.get(token).ok_or_else(|| AnalysisError::OrphanEvent(token.clone()))?;
                    sessions[i].survey = Some(survey.clone());
                }
            }
        }
        Ok(Self { sessions })
    }

    pub fn responses(&self) -> Vec<TaskResponse> {
        self.sessions.iter().flat_map(|s| s.responses.iter().cloned()).collect()
    }

    pub fn plans(&self) -> Vec<SessionPlan> {
        self.sessions.iter().map(|s| s.plan.clone()).collect()
    }
}

/// Mean, sample std (absent below two values) and count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: Option<f64>,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        Some(Self {
            n: xs.len(),
            mean: mean(xs),
            std: (xs.len() > 1).then(|| sample_std(xs)),
        })
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.std {
            Some(s) => write!(f, "{:.2} ± {:.2}", self.mean, s),
            None => write!(f, "{:.2}", self.mean),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UserConditionAccuracy {
    pub correct: usize,
    pub incorrect: usize,
    pub idk: usize,
    pub skipped: usize,
    /// C / (C + I); absent when the user gave no Yes/No answer.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flag {
    pub participant_id: String,
    pub condition: Condition,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub per_user: BTreeMap<String, BTreeMap<Condition, UserConditionAccuracy>>,
    pub condition_means: BTreeMap<Condition, f64>,
    pub condition_stds: BTreeMap<Condition, f64>,
    /// Assisted mean minus unassisted mean.
    pub delta: Option<f64>,
    pub n_users: usize,
    pub flagged: Vec<Flag>,
    /// Paired over users with an accuracy in both conditions; positive t
    /// means higher assisted accuracy.
    pub paired_test: Option<StatTestResult>,
}

impl AccuracySummary {
    pub fn mean(&self, c: Condition) -> Option<f64> {
        self.condition_means.get(&c).copied()
    }

    fn pairs(&self) -> Vec<(f64, f64)> {
        self.per_user
            .values()
            .filter_map(|m| {
                let u = m.get(&Condition::Unassisted)?.accuracy?;
                let a = m.get(&Condition::Assisted)?.accuracy?;
                Some((u, a))
            })
            .collect()
    }
}

fn is_correct(r: &TaskResponse, gold: &GoldIndex) -> Result<Option<bool>, AnalysisError> {
    let g = gold.get(&r.record_id).ok_or_else(|| AnalysisError::UnknownRecord(r.record_id.clone()))?;
    Ok(r.answer.label().map(|l| l == *g))
}

/// Per-user, per-condition accuracy with IDK and Skipped excluded from both
/// numerator and denominator. Users without any Yes/No answer in a condition
/// are flagged and left out of that condition's mean.
pub fn user_accuracy(responses: &[TaskResponse], gold: &GoldIndex) -> Result<AccuracySummary, AnalysisError> {
    let mut per_user: BTreeMap<String, BTreeMap<Condition, UserConditionAccuracy>> = BTreeMap::new();
    for r in responses {
        let ok = is_correct(r, gold)?;
        let e = per_user
            .entry(r.participant_id.clone())
            .or_default()
            .entry(r.condition)
            .or_default();
        match (r.answer, ok) {
            (_, Some(true)) => e.correct += 1,
            (_, Some(false)) => e.incorrect += 1,
            (Answer::Idk, None) => e.idk += 1,
            (_, None) => e.skipped += 1,
        }
    }
    let mut flagged = Vec::new();
    let mut by_condition: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    for (pid, m) in per_user.iter_mut() {
        for (c, e) in m.iter_mut() {
            let n = e.correct + e.incorrect;
            if n == 0 {
                flagged.push(Flag {
                    participant_id: pid.clone(),
                    condition: *c,
                    reason: "no countable answers".into(),
                });
            } else {
                let acc = e.correct as f64 / n as f64;
                e.accuracy = Some(acc);
                by_condition.entry(*c).or_default().push(acc);
            }
        }
    }
    let condition_means: BTreeMap<Condition, f64> = by_condition.iter().map(|(c, v)| (*c, mean(v))).collect();
    let condition_stds = by_condition
        .iter()
        .filter(|(_, v)| v.len() > 1)
        .map(|(c, v)| (*c, sample_std(v)))
        .collect();
    let delta = match (condition_means.get(&Condition::Assisted), condition_means.get(&Condition::Unassisted)) {
        (Some(a), Some(u)) => Some(a - u),
        _ => None,
    };
    let mut s = AccuracySummary {
        n_users: per_user.len(),
        per_user,
        condition_means,
        condition_stds,
        delta,
        flagged,
        paired_test: None,
    };
    s.paired_test = paired_t_test(&s.pairs()).ok();
    Ok(s)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuggestionSplit {
    pub correct: Vec<TaskResponse>,
    pub incorrect: Vec<TaskResponse>,
}

/// Partition responses by whether the suggestion for their record matched
/// gold. Assisted responses need a suggestion; Unassisted responses follow
/// their record into the same subset, and are dropped when the record has no
/// suggestion.
pub fn split_by_suggestion_correctness(
    responses: &[TaskResponse],
    suggestions: &BTreeMap<String, Label>,
    gold: &GoldIndex,
) -> Result<SuggestionSplit, AnalysisError> {
    let mut out = SuggestionSplit::default();
    for r in responses {
        let g = gold.get(&r.record_id).ok_or_else(|| AnalysisError::UnknownRecord(r.record_id.clone()))?;
        let Some(s) = suggestions.get(&r.record_id) else {
            if r.condition == Condition::Assisted {
                return Err(AnalysisError::MissingSuggestion(r.record_id.clone()));
            }
            continue;
        };
        if s == g {
            out.correct.push(r.clone());
        } else {
            out.incorrect.push(r.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyReport {
    /// Every rated response is one observation.
    pub per_response: BTreeMap<Condition, Summary>,
    /// Each CQ's mean rating is one observation.
    pub per_cq: BTreeMap<Condition, Summary>,
    /// Cohen's d, unassisted minus assisted (positive: assisted felt easier).
    pub cohens_d_per_response: Option<f64>,
    pub cohens_d_per_cq: Option<f64>,
    pub by_expertise: BTreeMap<Expertise, BTreeMap<Condition, Summary>>,
    /// Users' mean ratings, paired across conditions.
    pub paired_test: Option<StatTestResult>,
    pub idk: Option<Summary>,
    pub answered: Option<Summary>,
}

pub fn difficulty_report(data: &StudyData) -> DifficultyReport {
    let mut per_response: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    let mut per_cq_raw: BTreeMap<Condition, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    let mut by_expertise: BTreeMap<Expertise, BTreeMap<Condition, Vec<f64>>> = BTreeMap::new();
    let mut per_user: BTreeMap<&str, BTreeMap<Condition, Vec<f64>>> = BTreeMap::new();
    let (mut idk, mut answered) = (Vec::new(), Vec::new());
    for s in &data.sessions {
        for r in &s.responses {
            let Some(d) = r.difficulty_rating.map(f64::from) else { continue };
            per_response.entry(r.condition).or_default().push(d);
            per_cq_raw.entry(r.condition).or_default().entry(&r.record_id).or_default().push(d);
            by_expertise.entry(s.plan.expertise).or_default().entry(r.condition).or_default().push(d);
            per_user.entry(&r.participant_id).or_default().entry(r.condition).or_default().push(d);
            if r.answer == Answer::Idk {
                idk.push(d);
            } else {
                answered.push(d);
            }
        }
    }
    let per_cq: BTreeMap<Condition, Vec<f64>> = per_cq_raw
        .into_iter()
        .map(|(c, m)| (c, m.values().map(|v| mean(v)).collect()))
        .collect();
    let summarize = |m: &BTreeMap<Condition, Vec<f64>>| -> BTreeMap<Condition, Summary> {
        m.iter().filter_map(|(c, v)| Some((*c, Summary::of(v)?))).collect()
    };
    let d_of = |m: &BTreeMap<Condition, Vec<f64>>| {
        cohens_d(m.get(&Condition::Unassisted)?, m.get(&Condition::Assisted)?).ok()
    };
    let pairs: Vec<(f64, f64)> = per_user
        .values()
        .filter_map(|m| Some((mean(m.get(&Condition::Unassisted)?), mean(m.get(&Condition::Assisted)?))))
        .collect();
    DifficultyReport {
        per_response: summarize(&per_response),
        per_cq: summarize(&per_cq),
        cohens_d_per_response: d_of(&per_response),
        cohens_d_per_cq: d_of(&per_cq),
        by_expertise: by_expertise.iter().map(|(e, m)| (*e, summarize(m))).collect(),
        paired_test: paired_t_test(&pairs).ok(),
        idk: Summary::of(&idk),
        answered: Summary::of(&answered),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningRow {
    pub condition_order: ConditionOrder,
    /// `None` pools both expertise groups.
    pub expertise: Option<Expertise>,
    pub first_condition: Condition,
    pub second_condition: Condition,
    /// Users with an accuracy in both halves.
    pub n_users: usize,
    pub first_half: f64,
    pub second_half: f64,
    /// Second half minus first half.
    pub delta: f64,
    pub test: Option<StatTestResult>,
}

/// First- vs second-half accuracy per (condition order, expertise) stratum,
/// averaged over users. Empty strata are omitted.
pub fn learning_curve(
    responses: &[TaskResponse],
    plans: &[SessionPlan],
    gold: &GoldIndex,
) -> Result<Vec<LearningRow>, AnalysisError> {
    let plan_of: BTreeMap<&str, &SessionPlan> = plans.iter().map(|p| (p.participant_id.as_str(), p)).collect();
    let mut counts: BTreeMap<&str, BTreeMap<Half, (usize, usize)>> = BTreeMap::new();
    for r in responses {
        if let Some(ok) = is_correct(r, gold)? {
            let e = counts.entry(&r.participant_id).or_default().entry(r.half).or_default();
            e.0 += ok as usize;
            e.1 += 1;
        }
    }
    let user_pair = |pid: &str| -> Option<(f64, f64)> {
        let m = counts.get(pid)?;
        let (c1, n1) = m.get(&Half::First)?;
        let (c2, n2) = m.get(&Half::Second)?;
        Some((*c1 as f64 / *n1 as f64, *c2 as f64 / *n2 as f64))
    };
    let mut rows = Vec::new();
    for order in [ConditionOrder::AssistedFirst, ConditionOrder::UnassistedFirst] {
        for expertise in [None, Some(Expertise::Expert), Some(Expertise::NonExpert)] {
            let pairs: Vec<(f64, f64)> = plans
                .iter()
                .filter(|p| p.condition_order == order && expertise.is_none_or(|e| p.expertise == e))
                .filter(|p| plan_of.contains_key(p.participant_id.as_str()))
                .filter_map(|p| user_pair(&p.participant_id))
                .collect();
            if pairs.is_empty() {
                continue;
            }
            let first = mean(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let second = mean(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            rows.push(LearningRow {
                condition_order: order,
                expertise,
                first_condition: order.first(),
                second_condition: order.first().other(),
                n_users: pairs.len(),
                first_half: first,
                second_half: second,
                delta: second - first,
                test: paired_t_test(&pairs).ok(),
            });
        }
    }
    Ok(rows)
}

/// Condition × correctness counts over individual Yes/No answers:
/// rows Assisted, Unassisted; columns correct, incorrect.
pub fn condition_correctness_table(responses: &[TaskResponse], gold: &GoldIndex) -> Result<[[u64; 2]; 2], AnalysisError> {
    let mut t = [[0u64; 2]; 2];
    for r in responses {
        if let Some(ok) = is_correct(r, gold)? {
            let row = (r.condition == Condition::Unassisted) as usize;
            t[row][(!ok) as usize] += 1;
        }
    }
    Ok(t)
}

/// Per-CQ mean difficulty vs per-CQ accuracy.
pub fn difficulty_accuracy_correlation(responses: &[TaskResponse], gold: &GoldIndex) -> Result<Result<StatTestResult, StatsError>, AnalysisError> {
    let mut per: BTreeMap<&str, (Vec<f64>, usize, usize)> = BTreeMap::new();
    for r in responses {
        if let Some(ok) = is_correct(r, gold)? {
            let e = per.entry(&r.record_id).or_default();
            if let Some(d) = r.difficulty_rating {
                e.0.push(d as f64);
            }
            e.1 += ok as usize;
            e.2 += 1;
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = per
        .values()
        .filter(|(d, _, _)| !d.is_empty())
        .map(|(d, c, n)| (mean(d), *c as f64 / *n as f64))
        .unzip();
    Ok(pearson_r(&xs, &ys))
}

/// Ontology axiom count vs share of IDK answers among a record's
/// non-skipped responses.
pub fn axiom_idk_correlation(responses: &[TaskResponse], corpus: &Corpus) -> Result<Result<StatTestResult, StatsError>, AnalysisError> {
    let mut per: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in responses {
        if r.answer == Answer::Skipped {
            continue;
        }
        let e = per.entry(&r.record_id).or_default();
        e.0 += (r.answer == Answer::Idk) as usize;
        e.1 += 1;
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (id, (idk, n)) in per {
        let rec = corpus.record(id).ok_or_else(|| AnalysisError::UnknownRecord(id.to_owned()))?;
        let axioms = corpus.ontology_for(rec).map(|o| o.axiom_count).unwrap_or(0);
        xs.push(axioms as f64);
        ys.push(idk as f64 / n as f64);
    }
    Ok(pearson_r(&xs, &ys))
}

/// Signed whole-percent rendering of an accuracy difference: 0.1272 → "+13%".
pub fn format_delta(delta: f64) -> String {
    let pct = (delta * 100.0).round();
    if pct == 0.0 {
        "+0%".to_owned()
    } else {
        format!("{pct:+.0}%")
    }
}

pub fn format_pct(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub n_participants: usize,
    pub n_responses: usize,
    pub overall: AccuracySummary,
    pub suggestion_correct: AccuracySummary,
    pub suggestion_incorrect: AccuracySummary,
    /// Each answer an independent observation.
    pub chi_square: Option<StatTestResult>,
    pub difficulty: DifficultyReport,
    pub difficulty_accuracy: Option<StatTestResult>,
    pub axioms_vs_idk: Option<StatTestResult>,
    pub learning_curve: Vec<LearningRow>,
    pub sus: Option<Summary>,
    pub notes: Vec<String>,
}

pub fn build_report(
    data: &StudyData,
    corpus: &Corpus,
    suggestions: &BTreeMap<String, Label>,
) -> Result<StudyReport, AnalysisError> {
    let gold = gold_labels(corpus);
    let responses = data.responses();
    let split = split_by_suggestion_correctness(&responses, suggestions, &gold)?;
    let mut notes = Vec::new();
    let mut keep = |what: &str, r: Result<StatTestResult, StatsError>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{what}: {e}"));
            None
        }
    };
    let chi_square = keep("chi-square", chi_square_2x2(condition_correctness_table(&responses, &gold)?, false));
    let difficulty_accuracy = keep("difficulty vs accuracy", difficulty_accuracy_correlation(&responses, &gold)?);
    let axioms_vs_idk = keep("axiom count vs IDK rate", axiom_idk_correlation(&responses, corpus)?);
    let sus: Vec<f64> = data.sessions.iter().filter_map(|s| s.survey.as_ref().map(|v| v.score)).collect();
    let participants: BTreeSet<&str> = data.sessions.iter().map(|s| s.plan.participant_id.as_str()).collect();
    Ok(StudyReport {
        n_participants: participants.len(),
        n_responses: responses.len(),
        overall: user_accuracy(&responses, &gold)?,
        suggestion_correct: user_accuracy(&split.correct, &gold)?,
        suggestion_incorrect: user_accuracy(&split.incorrect, &gold)?,
        chi_square,
        difficulty: difficulty_report(data),
        difficulty_accuracy,
        axioms_vs_idk,
        learning_curve: learning_curve(&responses, &data.plans(), &gold)?,
        sus: Summary::of(&sus),
        notes,
    })
}

fn test_suffix(t: Option<&StatTestResult>, name: &str) -> String {
    match t {
        Some(t) => format!(" ({name} = {:.2}, p = {:.3})", t.statistic, t.p_value),
        None => String::new(),
    }
}

impl StudyReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Study: {} participants, {} responses", self.n_participants, self.n_responses);
        let _ = writeln!(s, "\nAccuracy (IDK and skipped excluded)");
        for (name, a) in [
            ("all tasks", &self.overall),
            ("suggestion correct", &self.suggestion_correct),
            ("suggestion incorrect", &self.suggestion_incorrect),
        ] {
            match (a.mean(Condition::Unassisted), a.mean(Condition::Assisted), a.delta) {
                (Some(u), Some(x), Some(d)) => {
                    let _ = writeln!(
                        s,
                        "  {name:<21} {} from {} to {} ({:+.2} pp){}",
                        format_delta(d),
                        format_pct(u),
                        format_pct(x),
                        d * 100.0,
                        test_suffix(a.paired_test.as_ref(), "t")
                    );
                }
                _ => {
                    let _ = writeln!(s, "  {name:<21} n/a");
                }
            }
            for f in &a.flagged {
                let _ = writeln!(s, "    excluded {} ({}): {}", f.participant_id, f.condition, f.reason);
            }
        }
        if let Some(c) = &self.chi_square {
            let _ = writeln!(s, "  condition x correctness, per answer: chi2 = {:.2}, p = {:.3}", c.statistic, c.p_value);
        }

        let d = &self.difficulty;
        let _ = writeln!(s, "\nPerceived difficulty (1-5)");
        for (name, m, es) in [
            ("per CQ", &d.per_cq, d.cohens_d_per_cq),
            ("per response", &d.per_response, d.cohens_d_per_response),
        ] {
            if let (Some(a), Some(u)) = (m.get(&Condition::Assisted), m.get(&Condition::Unassisted)) {
                let es = es.map(|x| format!(", d = {x:.2}")).unwrap_or_default();
                let _ = writeln!(s, "  {name:<13} assisted {a}, unassisted {u}{es}");
            }
        }
        for (e, m) in &d.by_expertise {
            if let (Some(a), Some(u)) = (m.get(&Condition::Assisted), m.get(&Condition::Unassisted)) {
                let name = match e {
                    Expertise::Expert => "experts",
                    Expertise::NonExpert => "non-experts",
                };
                let _ = writeln!(s, "  {name:<13} {:.2} unassisted, {:.2} assisted", u.mean, a.mean);
            }
        }
        if let (Some(i), Some(o)) = (&d.idk, &d.answered) {
            let _ = writeln!(s, "  IDK answers   {:.2} vs {:.2} for other answers", i.mean, o.mean);
        }
        if let Some(t) = &self.difficulty_accuracy {
            let _ = writeln!(s, "  difficulty vs accuracy (per CQ): r = {:.2}, p = {:.3}", t.statistic, t.p_value);
        }
        if let Some(t) = &self.axioms_vs_idk {
            let _ = writeln!(s, "  axiom count vs IDK rate: r = {:.2}, p = {:.3}", t.statistic, t.p_value);
        }

        let _ = writeln!(s, "\nLearning curve (second half minus first half)");
        for r in &self.learning_curve {
            let who = match r.expertise {
                None => "all",
                Some(Expertise::Expert) => "experts",
                Some(Expertise::NonExpert) => "non-experts",
            };
            let order = match r.condition_order {
                ConditionOrder::AssistedFirst => "assisted first",
                ConditionOrder::UnassistedFirst => "unassisted first",
            };
            let _ = writeln!(
                s,
                "  {order:<16} {who:<11} {} {:.2} -> {} {:.2} ({:+.2}, n = {})",
                r.first_condition, r.first_half, r.second_condition, r.second_half, r.delta, r.n_users
            );
        }
        if let Some(sus) = &self.sus {
            let _ = writeln!(s, "\nSUS: {sus} (n = {})", sus.n);
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

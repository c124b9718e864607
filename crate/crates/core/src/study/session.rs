use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{compute_sus, Answer, Condition, SessionPlan, SuggestionCard, SusError, SusResponse, TaskResponse};

/// Monotonic time source. Only differences between readings matter.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

#[derive(Debug, Clone, Copy)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Clock moved by hand, for tests and simulations.
#[derive(Debug, Default)]
pub struct ManualClock(Mutex<Duration>);

impl ManualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        *self.0.lock().unwrap() += d;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionError {
    #[error("out of order: expected a response for {expected}, got {got}")]
    OutOfOrderResponse { expected: String, got: String },
    #[error("record {record_id} already has a response")]
    DuplicateResponse { record_id: String },
    #[error("the time window for record {record_id} has closed")]
    WindowExpired { record_id: String },
    #[error("session expired")]
    SessionExpired,
    #[error("all tasks in this session are answered")]
    SessionComplete,
    #[error("record {record_id} is not part of this session")]
    UnknownRecord { record_id: String },
    #[error("invalid response: {message}")]
    InvalidResponse { message: String },
    #[error("survey is available once all tasks are done")]
    SurveyNotReady,
    #[error("survey already submitted")]
    DuplicateSurvey,
    #[error(transparent)]
    Sus(#[from] SusError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SessionStatus {
    Task {
        index: usize,
        total: usize,
        record_id: String,
        condition: Condition,
        remaining_ms: u64,
    },
    Survey,
    Finished,
}

/// What the participant sees for the current task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskView {
    pub index: usize,
    pub total: usize,
    pub record_id: String,
    pub condition: Condition,
    pub cq_text: String,
    pub story_oneline: String,
    pub ontology_url: String,
    pub remaining_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<SuggestionCard>,
}

/// One participant's run through a plan.
///
/// Each condition has its own window, opened when its first task is reached
/// (the first one on the first `start`). Expiry is detected lazily on the
/// next interaction: every unanswered task of the expired condition is
/// recorded as Skipped and the next condition's window opens at the instant
/// the previous one closed.
#[derive(Debug, Clone)]
pub struct Session {
    pub token: String,
    pub plan: SessionPlan,
    responses: Vec<TaskResponse>,
    window_start: Option<Duration>,
    closed_by_expiry: bool,
    survey: Option<SusResponse>,
    logged: usize,
}

impl Session {
    pub fn new(token: impl Into<String>, plan: SessionPlan) -> Self {
        Self {
            token: token.into(),
            plan,
            responses: Vec::new(),
            window_start: None,
            closed_by_expiry: false,
            survey: None,
            logged: 0,
        }
    }

    pub fn responses(&self) -> &[TaskResponse] {
        &self.responses
    }

    pub fn survey(&self) -> Option<&SusResponse> {
        self.survey.as_ref()
    }

    pub fn is_started(&self) -> bool {
        self.window_start.is_some()
    }

    fn cursor(&self) -> usize {
        self.responses.len()
    }

    fn tasks_done(&self) -> bool {
        self.cursor() >= self.plan.ordered_tasks.len()
    }

    /// Open the first window if not yet open.
    pub fn start(&mut self, now: Duration) {
        if self.window_start.is_none() {
            self.window_start = Some(now);
        }
    }

    /// Apply any window expiries up to `now`.
    pub fn refresh(&mut self, now: Duration) {
        let limit = self.plan.per_condition_limit();
        while let Some(ws) = self.window_start {
            if self.tasks_done() || now.saturating_sub(ws) < limit {
                return;
            }
            let condition = self.plan.ordered_tasks[self.cursor()].condition;
            while !self.tasks_done() && self.plan.ordered_tasks[self.cursor()].condition == condition {
                let i = self.cursor();
                self.responses.push(TaskResponse {
                    participant_id: self.plan.participant_id.clone(),
                    record_id: self.plan.ordered_tasks[i].record_id.clone(),
                    condition,
                    answer: Answer::Skipped,
                    difficulty_rating: None,
                    elapsed_ms: limit.as_millis() as u64,
                    half: self.plan.half_of(i),
                });
            }
            self.window_start = Some(ws + limit);
            if self.tasks_done() {
                self.closed_by_expiry = true;
            }
        }
    }

    pub fn status(&mut self, now: Duration) -> SessionStatus {
        self.refresh(now);
        if self.tasks_done() {
            return if self.survey.is_some() {
                SessionStatus::Finished
            } else {
                SessionStatus::Survey
            };
        }
        let i = self.cursor();
        let task = &self.plan.ordered_tasks[i];
        let limit = self.plan.per_condition_limit();
        let used = self.window_start.map(|ws| now.saturating_sub(ws)).unwrap_or_default();
        SessionStatus::Task {
            index: i,
            total: self.plan.ordered_tasks.len(),
            record_id: task.record_id.clone(),
            condition: task.condition,
            remaining_ms: limit.saturating_sub(used).as_millis() as u64,
        }
    }

    /// Record an answer for the current task.
    pub fn submit(
        &mut self,
        now: Duration,
        record_id: &str,
        answer: Answer,
        difficulty: Option<u8>,
    ) -> Result<TaskResponse, SessionError> {
        self.start(now);
        self.refresh(now);
        if self.tasks_done() {
            return Err(if self.closed_by_expiry {
                SessionError::SessionExpired
            } else {
                SessionError::SessionComplete
            });
        }
        let Some(pos) = self.plan.ordered_tasks.iter().position(|t| t.record_id == record_id) else {
            return Err(SessionError::UnknownRecord { record_id: record_id.to_owned() });
        };
        let cursor = self.cursor();
        if pos < cursor {
            return Err(if self.responses[pos].answer == Answer::Skipped {
                SessionError::WindowExpired { record_id: record_id.to_owned() }
            } else {
                SessionError::DuplicateResponse { record_id: record_id.to_owned() }
            });
        }
        if pos > cursor {
            return Err(SessionError::OutOfOrderResponse {
                expected: self.plan.ordered_tasks[cursor].record_id.clone(),
                got: record_id.to_owned(),
            });
        }
        let invalid = |m: &str| Err(SessionError::InvalidResponse { message: m.to_owned() });
        if answer == Answer::Skipped {
            return invalid("skipped is recorded by the server only");
        }
        match difficulty {
            None => return invalid("a difficulty rating is required"),
            Some(d) if !(1..=5).contains(&d) => return invalid("difficulty must be 1-5"),
            _ => {}
        }
        let ws = self.window_start.expect("started above");
        let task = &self.plan.ordered_tasks[pos];
        let r = TaskResponse {
            participant_id: self.plan.participant_id.clone(),
            record_id: record_id.to_owned(),
            condition: task.condition,
            answer,
            difficulty_rating: difficulty,
            elapsed_ms: now.saturating_sub(ws).as_millis() as u64,
            half: self.plan.half_of(pos),
        };
        self.responses.push(r.clone());
        let next = self.plan.ordered_tasks.get(pos + 1);
        if next.is_some_and(|n| n.condition != r.condition) {
            self.window_start = Some(now);
        }
        Ok(r)
    }

    pub fn submit_survey(&mut self, now: Duration, items: &[u8]) -> Result<SusResponse, SessionError> {
        self.refresh(now);
        if !self.tasks_done() {
            return Err(SessionError::SurveyNotReady);
        }
        if self.survey.is_some() {
            return Err(SessionError::DuplicateSurvey);
        }
        let score = compute_sus(items)?;
        let s = SusResponse {
            participant_id: self.plan.participant_id.clone(),
            items: items.to_vec(),
            score,
        };
        self.survey = Some(s.clone());
        Ok(s)
    }

    /// Responses recorded since the last call, including automatic skips.
    pub fn drain_unlogged(&mut self) -> Vec<TaskResponse> {
        let new = self.responses[self.logged..].to_vec();
        self.logged = self.responses.len();
        new
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::{build_assignment_with_limit, Expertise, Participant};

    fn plan(limit: Duration) -> SessionPlan {
        let recs: Vec<String> = (0..20).map(|i| format!("cq{i}")).collect();
        build_assignment_with_limit(&[Participant::new("u0", Expertise::Expert)], &recs, 1, limit)
            .unwrap()
            .remove(0)
    }

    fn id(s: &Session, i: usize) -> String {
        s.plan.ordered_tasks[i].record_id.clone()
    }

    #[test]
    fn answer_within_window() {
        let mut s = Session::new("t", plan(Duration::from_secs(60)));
        s.start(Duration::ZERO);
        let r = s.submit(Duration::from_secs(5), &id(&s, 0), Answer::Yes, Some(2)).unwrap();
        assert_eq!(r.elapsed_ms, 5000);
        assert_eq!(r.condition, Condition::Assisted);
        assert_eq!(r.half, super::super::Half::First);
    }

    #[test]
    fn expiry_skips_remaining_tasks_of_condition() {
        let limit = Duration::from_secs(2);
        let mut s = Session::new("t", plan(limit));
        s.start(Duration::ZERO);
        for i in 0..7 {
            s.submit(Duration::from_millis(100 * (i as u64 + 1)), &id(&s, i), Answer::No, Some(3)).unwrap();
        }
        let late = id(&s, 7);
        let err = s.submit(Duration::from_millis(2500), &late, Answer::Yes, Some(1)).unwrap_err();
        assert_eq!(err, SessionError::WindowExpired { record_id: late });
        let skipped: Vec<_> = s.responses().iter().filter(|r| r.answer == Answer::Skipped).collect();
        assert_eq!(skipped.len(), 3);
        assert!(skipped.iter().all(|r| r.difficulty_rating.is_none() && r.condition == Condition::Assisted));
        // Second window opened at 2 s.
        let r = s.submit(Duration::from_millis(2600), &id(&s, 10), Answer::Idk, Some(4)).unwrap();
        assert_eq!(r.elapsed_ms, 600);
        assert_eq!(r.condition, Condition::Unassisted);
        assert_eq!(r.half, super::super::Half::Second);
        assert_eq!(s.drain_unlogged().len(), 11);
        assert!(s.drain_unlogged().is_empty());
    }

    #[test]
    fn whole_session_expiry() {
        let mut s = Session::new("t", plan(Duration::from_secs(1)));
        s.start(Duration::ZERO);
        let r0 = id(&s, 0);
        assert_eq!(s.submit(Duration::from_secs(10), &r0, Answer::Yes, Some(1)), Err(SessionError::SessionExpired));
        assert_eq!(s.responses().len(), 20);
        assert_eq!(s.status(Duration::from_secs(10)), SessionStatus::Survey);
    }

    #[test]
    fn order_and_duplicates() {
        let mut s = Session::new("t", plan(Duration::from_secs(60)));
        let (a, b) = (id(&s, 0), id(&s, 1));
        assert!(matches!(
            s.submit(Duration::ZERO, &b, Answer::Yes, Some(1)),
            Err(SessionError::OutOfOrderResponse { .. })
        ));
        s.submit(Duration::ZERO, &a, Answer::Yes, Some(1)).unwrap();
        assert_eq!(
            s.submit(Duration::ZERO, &a, Answer::Yes, Some(1)),
            Err(SessionError::DuplicateResponse { record_id: a.clone() })
        );
        assert!(matches!(s.submit(Duration::ZERO, &b, Answer::Yes, None), Err(SessionError::InvalidResponse { .. })));
        assert!(matches!(s.submit(Duration::ZERO, "nope", Answer::Yes, Some(1)), Err(SessionError::UnknownRecord { .. })));
        assert_eq!(s.submit_survey(Duration::ZERO, &[3; 10]), Err(SessionError::SurveyNotReady));
    }

    #[test]
    fn full_session_then_survey() {
        let mut s = Session::new("t", plan(Duration::from_secs(60)));
        let mut last = (Condition::Assisted, 0);
        for i in 0..20 {
            let r = s.submit(Duration::from_secs(i as u64), &id(&s, i), Answer::Yes, Some(2)).unwrap();
            if r.condition == last.0 {
                assert!(r.elapsed_ms >= last.1);
            }
            last = (r.condition, r.elapsed_ms);
        }
        assert_eq!(s.status(Duration::from_secs(30)), SessionStatus::Survey);
        assert_eq!(s.submit(Duration::from_secs(30), &id(&s, 0), Answer::Yes, Some(2)), Err(SessionError::SessionComplete));
        assert_eq!(s.submit_survey(Duration::from_secs(31), &[4, 2, 4, 2, 4, 2, 4, 2, 4, 2]).unwrap().score, 75.0);
        assert_eq!(s.status(Duration::from_secs(32)), SessionStatus::Finished);
    }
}

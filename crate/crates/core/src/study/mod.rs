//! Counterbalanced human evaluation sessions: assignment, timed task
//! sessions with skip semantics, SUS survey, event log and the HTTP API the
//! study UI talks to.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::sparql::VerificationVerdict;

mod assign;
mod bundle;
mod log;
mod server;
mod session;
mod sus;

pub use assign::{build_assignment, build_assignment_with_limit, AssignmentError, Participant};
pub use bundle::{freeze_suggestions, BundleError, StudyBundle};
pub use log::{read_events, read_events_str, responses_by_token, surveys_by_token, EventLog, StudyEvent};
pub use server::{router, serve, AppState, CreateSession, ResponseBody, SurveyBody};
pub use session::{Clock, ManualClock, Session, SessionError, SessionStatus, SystemClock, TaskView};
pub use sus::{compute_sus, SusError, SUS_ITEMS};

pub const DEFAULT_CONDITION_LIMIT: Duration = Duration::from_secs(20 * 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Assisted,
    Unassisted,
}

impl Condition {
    pub fn other(self) -> Self {
        match self {
            Condition::Assisted => Condition::Unassisted,
            Condition::Unassisted => Condition::Assisted,
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Condition::Assisted => "assisted",
            Condition::Unassisted => "unassisted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionOrder {
    AssistedFirst,
    UnassistedFirst,
}

impl ConditionOrder {
    pub fn first(self) -> Condition {
        match self {
            ConditionOrder::AssistedFirst => Condition::Assisted,
            ConditionOrder::UnassistedFirst => Condition::Unassisted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expertise {
    Expert,
    #[default]
    NonExpert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    Idk,
    /// Recorded by the server when a condition's window runs out.
    Skipped,
}

impl Answer {
    /// The label this answer asserts, if any.
    pub fn label(self) -> Option<Label> {
        match self {
            Answer::Yes => Some(Label::Yes),
            Answer::No => Some(Label::No),
            Answer::Idk | Answer::Skipped => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Half {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedTask {
    pub record_id: String,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub participant_id: String,
    #[serde(default)]
    pub expertise: Expertise,
    pub ordered_tasks: Vec<PlannedTask>,
    pub condition_order: ConditionOrder,
    #[serde(default = "default_limit_ms")]
    pub per_condition_limit_ms: u64,
}

fn default_limit_ms() -> u64 {
    DEFAULT_CONDITION_LIMIT.as_millis() as u64
}

impl SessionPlan {
    pub fn per_condition_limit(&self) -> Duration {
        Duration::from_millis(self.per_condition_limit_ms)
    }

    pub fn with_limit(mut self, limit: Duration) -> Self {
        self.per_condition_limit_ms = limit.as_millis() as u64;
        self
    }

    pub fn count(&self, condition: Condition) -> usize {
        self.ordered_tasks.iter().filter(|t| t.condition == condition).count()
    }

    /// Half of the whole session that task `index` falls in.
    pub fn half_of(&self, index: usize) -> Half {
        if index < self.ordered_tasks.len().div_ceil(2) {
            Half::First
        } else {
            Half::Second
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResponse {
    pub participant_id: String,
    pub record_id: String,
    pub condition: Condition,
    pub answer: Answer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty_rating: Option<u8>,
    /// Time since the condition's window opened.
    pub elapsed_ms: u64,
    pub half: Half,
}

impl TaskResponse {
    pub fn elapsed(&self) -> Duration {
        Duration::from_millis(self.elapsed_ms)
    }

    /// Counted towards accuracy: a Yes or No answer.
    pub fn is_countable(&self) -> bool {
        self.answer.label().is_some()
    }
}

/// Frozen LLM suggestion shown on Assisted tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionCard {
    pub record_id: String,
    pub label: Label,
    pub sparql: String,
    pub partial: bool,
    pub verification: VerificationVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusResponse {
    pub participant_id: String,
    pub items: Vec<u8>,
    pub score: f64,
}

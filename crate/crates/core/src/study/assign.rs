use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Condition, ConditionOrder, Expertise, PlannedTask, SessionPlan, DEFAULT_CONDITION_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    #[serde(default)]
    pub expertise: Expertise,
}

impl Participant {
    pub fn new(id: impl Into<String>, expertise: Expertise) -> Self {
        Self { id: id.into(), expertise }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssignmentError {
    #[error("record count {0} is odd; conditions need equal halves")]
    OddRecordCount(usize),
    #[error("no participants")]
    NoParticipants,
    #[error("duplicate record id {0}")]
    DuplicateRecord(String),
    #[error("duplicate participant id {0}")]
    DuplicateParticipant(String),
}

/// Counterbalanced plans, one per participant, in participant order.
///
/// The records are shuffled once (by `seed`) and cut into halves A and B.
/// Participants are taken in consecutive pairs: within a pair one sees A
/// assisted and the other B, so every record gets one exposure per condition
/// per pair. Condition order alternates with the participant index, and the
/// A/B choice flips on every other pair so order and set are crossed.
/// Within a condition, task order is shuffled per participant.
pub fn build_assignment(
    participants: &[Participant],
    records: &[String],
    seed: u64,
) -> Result<Vec<SessionPlan>, AssignmentError> {
    build_assignment_with_limit(participants, records, seed, DEFAULT_CONDITION_LIMIT)
}

pub fn build_assignment_with_limit(
    participants: &[Participant],
    records: &[String],
    seed: u64,
    limit: Duration,
) -> Result<Vec<SessionPlan>, AssignmentError> {
    if records.len() % 2 == 1 {
        return Err(AssignmentError::OddRecordCount(records.len()));
    }
    if participants.is_empty() {
        return Err(AssignmentError::NoParticipants);
    }
    let mut seen = std::collections::BTreeSet::new();
    for r in records {
        if !seen.insert(r) {
            return Err(AssignmentError::DuplicateRecord(r.clone()));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for p in participants {
        if !seen.insert(&p.id) {
            return Err(AssignmentError::DuplicateParticipant(p.id.clone()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = records.to_vec();
    shuffled.shuffle(&mut rng);
    let (set_a, set_b) = shuffled.split_at(records.len() / 2);

    Ok(participants
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let order = if i % 2 == 0 {
                ConditionOrder::AssistedFirst
            } else {
                ConditionOrder::UnassistedFirst
            };
            let a_assisted = ((i / 2) % 2 == 0) ^ (i % 2 == 1);
            let (assisted, unassisted) = if a_assisted { (set_a, set_b) } else { (set_b, set_a) };
            let mut prng = ChaCha8Rng::seed_from_u64(seed);
            prng.set_stream(i as u64 + 1);
            let mut block = |ids: &[String], condition: Condition| {
                let mut v: Vec<PlannedTask> = ids
                    .iter()
                    .map(|r| PlannedTask { record_id: r.clone(), condition })
                    .collect();
                v.shuffle(&mut prng);
                v
            };
            let a = block(assisted, Condition::Assisted);
            let u = block(unassisted, Condition::Unassisted);
            let ordered_tasks = match order {
                ConditionOrder::AssistedFirst => [a, u].concat(),
                ConditionOrder::UnassistedFirst => [u, a].concat(),
            };
            SessionPlan {
                participant_id: p.id.clone(),
                expertise: p.expertise,
                ordered_tasks,
                condition_order: order,
                per_condition_limit_ms: limit.as_millis() as u64,
            }
        })
        .collect())
}

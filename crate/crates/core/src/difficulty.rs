//! Simple/Complex rating of a CQ from its logical form.
//!
//! A CQ is Simple when its formalization mentions at most two classes and at
//! most one object-property slot. A slot holds the alternative properties of
//! a disjunction, so `built(x,y) ∨ renovated(x,y)` is a single slot.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub const MAX_SIMPLE_CLASSES: usize = 2;
pub const MAX_SIMPLE_SLOTS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyClass {
    Simple,
    Complex,
}

/// Class and object-property atoms of a CQ's existential formula.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CqFormalization {
    #[serde(default)]
    pub classes: BTreeSet<String>,
    #[serde(default)]
    pub slots: Vec<BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormalizationError {
    #[error("property slot {0} is empty")]
    EmptySlot(usize),
    #[error("blank class or property name")]
    BlankName,
}

impl CqFormalization {
    pub fn new<C, S, P>(classes: C, slots: S) -> Self
    where
        C: IntoIterator,
        C::Item: Into<String>,
        S: IntoIterator<Item = P>,
        P: IntoIterator,
        P::Item: Into<String>,
    {
        Self {
            classes: classes.into_iter().map(Into::into).collect(),
            slots: slots
                .into_iter()
                .map(|s| s.into_iter().map(Into::into).collect())
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), FormalizationError> {
        if self.classes.iter().any(|c| c.trim().is_empty()) {
            return Err(FormalizationError::BlankName);
        }
        for (i, slot) in self.slots.iter().enumerate() {
            if slot.is_empty() {
                return Err(FormalizationError::EmptySlot(i));
            }
            if slot.iter().any(|p| p.trim().is_empty()) {
                return Err(FormalizationError::BlankName);
            }
        }
        Ok(())
    }
}

pub fn classify_difficulty(f: &CqFormalization) -> DifficultyClass {
    if f.classes.len() <= MAX_SIMPLE_CLASSES && f.slots.len() <= MAX_SIMPLE_SLOTS {
        DifficultyClass::Simple
    } else {
        DifficultyClass::Complex
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        let organ_builder = CqFormalization::new(["Person", "Organ"], [["built", "renovated"]]);
        assert_eq!(classify_difficulty(&organ_builder), DifficultyClass::Simple);

        let disposition = CqFormalization::new(
            ["Organ", "Parthood", "TimeInterval"],
            [vec!["isWholeIncludedIn"], vec!["hasTimeInterval"]],
        );
        assert_eq!(classify_difficulty(&disposition), DifficultyClass::Complex);

        assert_eq!(
            classify_difficulty(&CqFormalization::default()),
            DifficultyClass::Simple
        );
    }

    #[test]
    fn validation() {
        let f = CqFormalization {
            classes: BTreeSet::new(),
            slots: vec![BTreeSet::new()],
        };
        assert_eq!(f.validate(), Err(FormalizationError::EmptySlot(0)));
        let f = CqFormalization::new([" "], Vec::<Vec<String>>::new());
        assert_eq!(f.validate(), Err(FormalizationError::BlankName));
    }

    #[test]
    fn deserializes_manifest_block() {
        let f: CqFormalization =
            serde_json::from_str(r#"{"classes":["A","B"],"slots":[["p","q"]]}"#).unwrap();
        assert_eq!(f.slots.len(), 1);
        assert_eq!(classify_difficulty(&f), DifficultyClass::Simple);
    }

    proptest! {
        #[test]
        fn adding_atoms_never_simplifies(
            classes in prop::collection::btree_set("[a-z]{1,4}", 0..5),
            slots in prop::collection::vec(prop::collection::btree_set("[a-z]{1,4}", 1..3), 0..4),
            extra_class in "[A-Z]{5}",
        ) {
            let f = CqFormalization { classes, slots };
            let before = classify_difficulty(&f);
            let mut more_classes = f.clone();
            more_classes.classes.insert(extra_class);
            let mut more_slots = f.clone();
            more_slots.slots.push(["extra".to_owned()].into_iter().collect());
            if before == DifficultyClass::Complex {
                prop_assert_eq!(classify_difficulty(&more_classes), DifficultyClass::Complex);
                prop_assert_eq!(classify_difficulty(&more_slots), DifficultyClass::Complex);
            }
            let mut reversed = f.clone();
            reversed.slots.reverse();
            prop_assert_eq!(classify_difficulty(&reversed), before);
        }
    }
}

use serde::{Deserialize, Serialize};

/// The ten standard System Usability Scale statements, in order.
pub const SUS_ITEMS: [&str; 10] = [
    "I think that I would like to use this system frequently.",
    "I found the system unnecessarily complex.",
    "I thought the system was easy to use.",
    "I think that I would need the support of a technical person to be able to use this system.",
    "I found the various functions in this system were well integrated.",
    "I thought there was too much inconsistency in this system.",
    "I would imagine that most people would learn to use this system very quickly.",
    "I found the system very cumbersome to use.",
    "I felt very confident using the system.",
    "I needed to learn a lot of things before I could get going with this system.",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum SusError {
    #[error("expected 10 items, got {0}")]
    WrongItemCount(usize),
    #[error("item {index} is {value}, outside 1-5")]
    OutOfRange { index: usize, value: u8 },
}

/// SUS score in [0, 100]. Items are 1-based in the questionnaire, so
/// `items[0]` is item 1 (odd).
pub fn compute_sus(items: &[u8]) -> Result<f64, SusError> {
    if items.len() != 10 {
        return Err(SusError::WrongItemCount(items.len()));
    }
    let mut sum = 0u32;
    for (i, &v) in items.iter().enumerate() {
        if !(1..=5).contains(&v) {
            return Err(SusError::OutOfRange { index: i + 1, value: v });
        }
        sum += if i % 2 == 0 { v as u32 - 1 } else { 5 - v as u32 };
    }
    Ok(sum as f64 * 2.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_points() {
        assert_eq!(compute_sus(&[5, 1, 5, 1, 5, 1, 5, 1, 5, 1]), Ok(100.0));
        assert_eq!(compute_sus(&[3; 10]), Ok(50.0));
        assert_eq!(compute_sus(&[4, 2, 4, 2, 4, 2, 4, 2, 4, 2]), Ok(75.0));
        assert_eq!(compute_sus(&[1, 5, 1, 5, 1, 5, 1, 5, 1, 5]), Ok(0.0));
    }

    #[test]
    fn errors() {
        assert_eq!(compute_sus(&[3; 9]), Err(SusError::WrongItemCount(9)));
        assert_eq!(
            compute_sus(&[3, 3, 0, 3, 3, 3, 3, 3, 3, 3]),
            Err(SusError::OutOfRange { index: 3, value: 0 })
        );
    }

    proptest! {
        #[test]
        fn score_in_range_and_on_grid(items in prop::collection::vec(1u8..=5, 10)) {
            let s = compute_sus(&items).unwrap();
            prop_assert!((0.0..=100.0).contains(&s));
            prop_assert_eq!((s / 2.5).fract(), 0.0);
        }
    }
}

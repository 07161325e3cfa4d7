use serde::{Deserialize, Serialize};

/// Helpfulness score at or above which a crowd note counts as High.
pub const HIGH_MIN: f64 = 0.35;
/// Half-open band `[AVERAGE_MIN, AVERAGE_MAX)` of Average notes.
pub const AVERAGE_MIN: f64 = 0.05;
pub const AVERAGE_MAX: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HelpfulnessClass {
    High,
    Average,
    /// Scores in neither band, including non-finite input.
    Neither,
}

pub fn classify_helpfulness(score: f64) -> HelpfulnessClass {
    if score >= HIGH_MIN {
        HelpfulnessClass::High
    } else if (AVERAGE_MIN..AVERAGE_MAX).contains(&score) {
        HelpfulnessClass::Average
    } else {
        HelpfulnessClass::Neither
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries() {
        assert_eq!(classify_helpfulness(0.35), HelpfulnessClass::High);
        assert_eq!(classify_helpfulness(0.349_999), HelpfulnessClass::Neither);
        assert_eq!(classify_helpfulness(0.25), HelpfulnessClass::Neither);
        assert_eq!(classify_helpfulness(0.05), HelpfulnessClass::Average);
        assert_eq!(classify_helpfulness(0.049_999), HelpfulnessClass::Neither);
        assert_eq!(classify_helpfulness(f64::NAN), HelpfulnessClass::Neither);
        assert_eq!(classify_helpfulness(f64::INFINITY), HelpfulnessClass::High);
    }
}

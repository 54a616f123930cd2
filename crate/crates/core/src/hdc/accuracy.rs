use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// Inference accuracy carried as an exact `correct / total` pair.
///
/// Verification compares these integers directly; the float view exists only
/// for display.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExactAccuracy {
    pub correct: u32,
    pub total: u32,
}

impl ExactAccuracy {
    pub fn new(correct: u32, total: u32) -> Self {
        Self { correct, total }
    }

    /// Orders by rational value. A zero total counts as zero accuracy.
    pub fn cmp_value(&self, other: &ExactAccuracy) -> Ordering {
        let lhs = u64::from(self.correct) * u64::from(other.total.max(1));
        let rhs = u64::from(other.correct) * u64::from(self.total.max(1));
        lhs.cmp(&rhs)
    }

    pub fn meets(&self, threshold: Ratio<u32>) -> bool {
        if self.total == 0 {
            return *threshold.numer() == 0;
        }
        u64::from(self.correct) * u64::from(*threshold.denom())
            >= u64::from(*threshold.numer()) * u64::from(self.total)
    }

    pub fn as_ratio(&self) -> Option<Ratio<u32>> {
        (self.total > 0).then(|| Ratio::new(self.correct, self.total))
    }

    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * f64::from(self.correct) / f64::from(self.total)
        }
    }
}

impl fmt::Display for ExactAccuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} ({:.2}%)", self.correct, self.total, self.percent())
    }
}

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{BlockHeader, ChainError};
use crate::dataset::DatasetHash;

/// Hypervector dimensions a block may require, easiest first.
pub const DEFAULT_LADDER: [u32; 5] = [3000, 5000, 7000, 10000, 15000];

/// The two mining knobs (dimension and accuracy bar) plus the level count
/// needed to rebuild the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Difficulty {
    pub dimension: u32,
    #[serde(with = "super::serde_ratio")]
    pub accuracy_threshold: Ratio<u32>,
    pub num_levels: u32,
}

/// Consensus parameters fixed at genesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    #[serde(with = "dataset_hash_str")]
    pub dataset_hash: DatasetHash,
    pub ladder: Vec<u32>,
    pub initial: Difficulty,
    /// Blocks considered by the controller.
    pub window: usize,
    /// Median block interval below which the dimension steps up.
    pub t_low_ms: u64,
    /// Median block interval above which the dimension steps down.
    pub t_high_ms: u64,
    #[serde(with = "super::serde_ratio")]
    pub margin: Ratio<u32>,
    /// Threshold reduction applied each time a round finds no qualifying miner.
    #[serde(with = "super::serde_ratio")]
    pub decay_step: Ratio<u32>,
    pub reward: u64,
    pub max_block_txs: usize,
    pub genesis_timestamp: u64,
}

mod dataset_hash_str {
    use crate::dataset::DatasetHash;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(h: &DatasetHash, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&h.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DatasetHash, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl ChainParams {
    pub fn new(dataset_hash: DatasetHash) -> Self {
        Self {
            dataset_hash,
            ladder: DEFAULT_LADDER.to_vec(),
            initial: Difficulty {
                dimension: DEFAULT_LADDER[0],
                accuracy_threshold: Ratio::new(1, 2),
                num_levels: 10,
            },
            window: 10,
            t_low_ms: 30_000,
            t_high_ms: 120_000,
            margin: Ratio::new(2, 100),
            decay_step: Ratio::new(1, 100),
            reward: 50,
            max_block_txs: 64,
            genesis_timestamp: 1_700_000_000_000,
        }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        let bad = |m: String| Err(ChainError::Params(m));
        if self.ladder.is_empty() {
            return bad("dimension ladder is empty".into());
        }
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return bad("dimension ladder must be strictly increasing".into());
        }
        if !self.ladder.contains(&self.initial.dimension) {
            return bad(format!("initial dimension {} is not on the ladder", self.initial.dimension));
        }
        if self.initial.num_levels < 2 {
            return bad("num_levels must be at least 2".into());
        }
        let min_dim = 2 * (self.initial.num_levels - 1);
        if self.ladder[0] < min_dim {
            return bad(format!(
                "dimension {} too small for {} levels",
                self.ladder[0], self.initial.num_levels
            ));
        }
        if self.initial.accuracy_threshold > Ratio::from_integer(1) {
            return bad("initial threshold exceeds 1".into());
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if self.t_low_ms > self.t_high_ms {
            return bad(format!("t_low_ms {} exceeds t_high_ms {}", self.t_low_ms, self.t_high_ms));
        }
        if self.decay_step.is_zero() {
            return bad("decay_step must be positive".into());
        }
        if self.max_block_txs == 0 {
            return bad("max_block_txs must be at least 1 (room for the coinbase)".into());
        }
        Ok(())
    }
}

fn widen(r: Ratio<u32>) -> Ratio<u64> {
    Ratio::new(u64::from(*r.numer()), u64::from(*r.denom()))
}

/// Back to 32-bit terms; values that do not fit are floored to a 1e-6 grid.
fn narrow(r: Ratio<u64>) -> Ratio<u32> {
    match (u32::try_from(*r.numer()), u32::try_from(*r.denom())) {
        (Ok(n), Ok(d)) => Ratio::new(n, d),
        _ => {
            let scaled = (r * Ratio::from_integer(1_000_000)).floor().to_integer();
            Ratio::new(scaled.min(u64::from(u32::MAX)) as u32, 1_000_000)
        }
    }
}

fn saturating_sub(a: Ratio<u32>, b: Ratio<u32>) -> Ratio<u32> {
    if a <= b {
        Ratio::zero()
    } else {
        narrow(widen(a) - widen(b))
    }
}

/// Lower median of the last `window` block intervals, if any.
fn median_interval(recent: &[BlockHeader], window: usize) -> Option<u64> {
    let start = recent.len().saturating_sub(window + 1);
    let mut intervals: Vec<u64> = recent[start..]
        .windows(2)
        .map(|w| w[1].timestamp.saturating_sub(w[0].timestamp))
        .collect();
    if intervals.is_empty() {
        return None;
    }
    intervals.sort_unstable();
    Some(intervals[(intervals.len() - 1) / 2])
}

/// Difficulty required of the block that extends `recent` (oldest first,
/// ending at the parent).
///
/// The dimension moves one rung up the ladder when the median block interval
/// over the window is below `t_low_ms`, one rung down when above `t_high_ms`.
/// The threshold is the best accuracy claimed in the window minus the margin,
/// never below `baseline`. With no mined blocks yet the parent's threshold
/// carries over.
pub fn next_difficulty(recent: &[BlockHeader], params: &ChainParams, baseline: Ratio<u32>) -> Difficulty {
    let Some(parent) = recent.last() else {
        return params.initial;
    };
    let mut dimension = parent.difficulty.dimension;
    if let (Some(median), Some(rung)) = (
        median_interval(recent, params.window),
        params.ladder.iter().position(|&d| d == dimension),
    ) {
        if median < params.t_low_ms {
            dimension = params.ladder[(rung + 1).min(params.ladder.len() - 1)];
        } else if median > params.t_high_ms {
            dimension = params.ladder[rung.saturating_sub(1)];
        }
    }

    let best = recent
        .iter()
        .rev()
        .filter(|h| h.height > 0)
        .take(params.window)
        .filter_map(|h| h.accuracy_claim.as_ratio())
        .max();
    let accuracy_threshold = match best {
        Some(best) => saturating_sub(best, params.margin).max(baseline),
        None => parent.difficulty.accuracy_threshold,
    };

    Difficulty {
        dimension,
        accuracy_threshold,
        num_levels: params.initial.num_levels,
    }
}

/// Whether a sealed threshold is reachable from the expected one by the
/// stuck-round decay: equal to it, or lowered by whole decay steps, never
/// below `min(expected, baseline)`.
pub fn threshold_allowed(actual: Ratio<u32>, expected: Ratio<u32>, baseline: Ratio<u32>, step: Ratio<u32>) -> bool {
    if actual.numer() != actual.reduced().numer() || actual.denom() != actual.reduced().denom() {
        return false;
    }
    if actual == expected {
        return true;
    }
    let floor = expected.min(baseline);
    if actual > expected || actual < floor {
        return false;
    }
    if actual == floor {
        return true;
    }
    let steps = (widen(expected) - widen(actual)) / widen(step);
    steps.is_integer()
}

/// One stuck-round decay step.
pub(crate) fn decayed(threshold: Ratio<u32>, step: Ratio<u32>, floor: Ratio<u32>) -> Ratio<u32> {
    saturating_sub(threshold, step).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hdc::ExactAccuracy;

    fn params() -> ChainParams {
        ChainParams {
            t_low_ms: 100,
            t_high_ms: 1000,
            ..ChainParams::new(DatasetHash::default())
        }
    }

    fn header(height: u64, ts: u64, dim: u32, acc: (u32, u32)) -> BlockHeader {
        BlockHeader {
            height,
            prev_hash: [0; 32],
            merkle_root: [0; 32],
            dataset_hash: DatasetHash::default(),
            nonce: 0,
            accuracy_claim: ExactAccuracy::new(acc.0, acc.1),
            difficulty: Difficulty {
                dimension: dim,
                accuracy_threshold: Ratio::new(1, 2),
                num_levels: 10,
            },
            timestamp: ts,
        }
    }

    #[test]
    fn fast_blocks_step_up() {
        let recent = [header(0, 0, 7000, (0, 0)), header(1, 50, 7000, (80, 100))];
        assert_eq!(next_difficulty(&recent, &params(), Ratio::new(1, 2)).dimension, 10000);
    }

    #[test]
    fn clamps_at_ladder_ends() {
        let recent = [header(0, 0, 15000, (0, 0)), header(1, 50, 15000, (80, 100))];
        assert_eq!(next_difficulty(&recent, &params(), Ratio::new(1, 2)).dimension, 15000);
        let recent = [header(0, 0, 3000, (0, 0)), header(1, 5000, 3000, (80, 100))];
        assert_eq!(next_difficulty(&recent, &params(), Ratio::new(1, 2)).dimension, 3000);
        let recent = [header(0, 0, 5000, (0, 0)), header(1, 5000, 5000, (80, 100))];
        assert_eq!(next_difficulty(&recent, &params(), Ratio::new(1, 2)).dimension, 3000);
    }

    #[test]
    fn in_band_keeps_dimension() {
        let recent = [header(0, 0, 5000, (0, 0)), header(1, 500, 5000, (80, 100))];
        assert_eq!(next_difficulty(&recent, &params(), Ratio::new(1, 2)).dimension, 5000);
    }

    #[test]
    fn threshold_is_best_minus_margin() {
        let recent = [
            header(0, 0, 5000, (0, 0)),
            header(1, 500, 5000, (80, 100)),
            header(2, 1000, 5000, (87, 100)),
        ];
        let d = next_difficulty(&recent, &params(), Ratio::new(50, 100));
        assert_eq!(d.accuracy_threshold, Ratio::new(85, 100));
    }

    #[test]
    fn threshold_floored_at_baseline() {
        let recent = [header(0, 0, 5000, (0, 0)), header(1, 500, 5000, (40, 100))];
        let d = next_difficulty(&recent, &params(), Ratio::new(1, 2));
        assert_eq!(d.accuracy_threshold, Ratio::new(1, 2));
    }

    #[test]
    fn genesis_only_keeps_initial() {
        let p = params();
        let g = BlockHeader {
            difficulty: p.initial,
            ..header(0, 0, 3000, (0, 0))
        };
        assert_eq!(next_difficulty(&[g], &p, Ratio::new(1, 4)), p.initial);
        assert_eq!(next_difficulty(&[], &p, Ratio::new(1, 4)), p.initial);
    }

    #[test]
    fn window_limits_history() {
        let mut p = params();
        p.window = 2;
        let recent = [
            header(0, 0, 5000, (0, 0)),
            header(1, 5000, 5000, (99, 100)),
            header(2, 5500, 5000, (80, 100)),
            header(3, 6000, 5000, (70, 100)),
        ];
        let d = next_difficulty(&recent, &p, Ratio::new(1, 2));
        // Intervals in window: 500, 500 -> in band. Best of last two claims: 80/100.
        assert_eq!(d.dimension, 5000);
        assert_eq!(d.accuracy_threshold, Ratio::new(78, 100));
    }

    #[test]
    fn decay_schedule_is_recognised() {
        let step = Ratio::new(1, 100);
        let base = Ratio::new(1, 2);
        let expected = Ratio::new(85, 100);
        assert!(threshold_allowed(expected, expected, base, step));
        assert!(threshold_allowed(Ratio::new(83, 100), expected, base, step));
        assert!(threshold_allowed(base, expected, base, step));
        assert!(!threshold_allowed(Ratio::new(86, 100), expected, base, step));
        assert!(!threshold_allowed(Ratio::new(1, 3), expected, base, step));
        assert!(!threshold_allowed(Ratio::new(8351, 10000), expected, base, step));
        assert!(!threshold_allowed(Ratio::new_raw(34, 40), Ratio::new(17, 20), base, step));
        assert_eq!(decayed(Ratio::new(51, 100), step, base), base);
        assert_eq!(decayed(base, step, base), base);
    }

    #[test]
    fn param_validation() {
        assert!(ChainParams::new(DatasetHash::default()).validate().is_ok());
        let mut p = params();
        p.ladder = vec![5000, 3000];
        assert!(p.validate().is_err());
        let mut p = params();
        p.initial.dimension = 4000;
        assert!(p.validate().is_err());
        let mut p = params();
        p.t_low_ms = 2000;
        assert!(p.validate().is_err());
    }
}

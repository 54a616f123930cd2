//! The proof-of-useful-work engine.
//!
//! A trial turns one nonce into a trained model and its exact test accuracy.
//! Mining runs a fixed set of trials and keeps the best; trials may run in
//! parallel but the winner is a pure function of the trial set.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::Difficulty;
use crate::dataset::{Dataset, DatasetHash, TaskData};
use crate::hdc::{argmax_scores, dot, gen_item_memory, quantize, EncodingConfig, ExactAccuracy, HdcError, ItemMemory};
use crate::rng::SplitMix64;

/// How a miner walks the 32-bit nonce space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonceStrategy {
    /// `start, start + 1, ...` wrapping at 2^32.
    Sequential { start: u32 },
    /// High 32 bits of successive SplitMix64 outputs seeded with `seed`.
    Random { seed: u64 },
}

impl NonceStrategy {
    pub fn nonce_at(&self, index: u64) -> u32 {
        match *self {
            NonceStrategy::Sequential { start } => start.wrapping_add(index as u32),
            NonceStrategy::Random { seed } => (SplitMix64::output_at(seed, index) >> 32) as u32,
        }
    }

    /// `count` nonces starting at stream position `offset`.
    pub fn window(&self, offset: u64, count: u32) -> Vec<u32> {
        (0..u64::from(count)).map(|i| self.nonce_at(offset + i)).collect()
    }
}

impl Default for NonceStrategy {
    fn default() -> Self {
        NonceStrategy::Sequential { start: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiningTask {
    pub dataset_hash: DatasetHash,
    pub difficulty: Difficulty,
    pub nonce_budget: u32,
    pub strategy: NonceStrategy,
    /// Position in the strategy stream of the first nonce to try.
    pub offset: u64,
}

impl MiningTask {
    pub fn new(dataset_hash: DatasetHash, difficulty: Difficulty, nonce_budget: u32, strategy: NonceStrategy) -> Self {
        Self {
            dataset_hash,
            difficulty,
            nonce_budget,
            strategy,
            offset: 0,
        }
    }

    pub fn nonces(&self) -> Vec<u32> {
        self.strategy.window(self.offset, self.nonce_budget)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningResult {
    pub nonce: u32,
    pub accuracy: ExactAccuracy,
    /// Mean wall-clock seconds per trial. Measurement only, never hashed.
    pub nonce_time: f64,
    pub trials_used: u32,
    /// 1-based trial index at which the winning nonce was evaluated.
    pub found_at: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub nonce: u32,
    pub accuracy: ExactAccuracy,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct MiningOutcome {
    pub result: MiningResult,
    pub trials: Vec<TrialRecord>,
}

impl MiningOutcome {
    /// Best accuracy after the first `n` trials, for each `n` in `budgets`.
    pub fn best_curve(&self, budgets: &[usize]) -> Vec<(usize, ExactAccuracy)> {
        budgets
            .iter()
            .filter(|&&b| b >= 1 && b <= self.trials.len())
            .map(|&b| {
                let best = self.trials[..b]
                    .iter()
                    .map(|t| t.accuracy)
                    .max_by(|a, b| a.cmp_value(b))
                    .expect("non-empty prefix");
                (b, best)
            })
            .collect()
    }
}

/// Train and test sets quantized once. Quantization does not depend on the
/// nonce or the dimension, so every trial at a given level count reuses it.
#[derive(Debug, Clone)]
pub struct PreparedTask {
    num_features: usize,
    num_classes: usize,
    num_levels: usize,
    train_levels: Vec<u16>,
    train_labels: Vec<u32>,
    test_levels: Vec<u16>,
    test_labels: Vec<u32>,
}

fn quantize_all(ds: &Dataset, config: &EncodingConfig) -> Vec<u16> {
    ds.rows()
        .flat_map(|row| {
            row.iter()
                .zip(config.feature_bounds())
                .map(|(&v, &b)| quantize(v, b, config.num_levels()) as u16)
        })
        .collect()
}

impl PreparedTask {
    /// Feature bounds come from the training split only.
    pub fn new(train: &Dataset, test: &Dataset, num_levels: u32) -> Result<Self, HdcError> {
        if train.num_features() != test.num_features() {
            return Err(HdcError::FeatureCount {
                expected: train.num_features(),
                actual: test.num_features(),
            });
        }
        if train.num_classes() != test.num_classes() {
            return Err(HdcError::Config(format!(
                "train has {} classes, test has {}",
                train.num_classes(),
                test.num_classes()
            )));
        }
        if test.is_empty() {
            return Err(HdcError::EmptyTestSet);
        }
        if num_levels > u32::from(u16::MAX) {
            return Err(HdcError::Config(format!("{num_levels} levels is too many")));
        }
        // The dimension is irrelevant to quantization; 1 keeps the config valid.
        let config = EncodingConfig::from_rows(1, num_levels as usize, train.rows())?;
        Ok(Self {
            num_features: train.num_features(),
            num_classes: train.num_classes(),
            num_levels: num_levels as usize,
            train_levels: quantize_all(train, &config),
            train_labels: train.labels().to_vec(),
            test_levels: quantize_all(test, &config),
            test_labels: test.labels().to_vec(),
        })
    }

    pub fn from_task(task: &TaskData, num_levels: u32) -> Result<Self, HdcError> {
        Self::new(&task.train, &task.test, num_levels)
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    /// One full trial: item memory from `nonce`, encode, train, infer.
    ///
    /// Elements are independent across dimensions, so the work runs in
    /// blocks of `DIM_BLOCK` dimensions: class vectors are built for a block,
    /// then their squared norms and their dot products with each query
    /// block are added to running totals. The sums are exact, so the result
    /// equals the whole-vector computation while the working set stays in cache.
    pub fn trial(&self, nonce: u32, dim: usize) -> Result<ExactAccuracy, HdcError> {
        let m = self.num_features;
        let k = self.num_classes;
        let config = EncodingConfig::new(dim, self.num_levels, vec![(0.0, 0.0); m])?;
        let im = gen_item_memory(nonce, &config, m)?;
        let n_test = self.test_labels.len();

        let mut dots = vec![0i64; n_test * k];
        let mut norms = vec![0i64; k];
        let mut classes = vec![0i32; k * DIM_BLOCK];
        let mut query = vec![0i32; DIM_BLOCK];
        for start in (0..dim).step_by(DIM_BLOCK) {
            let end = (start + DIM_BLOCK).min(dim);
            let w = end - start;
            let classes = &mut classes[..k * w];
            classes.fill(0);
            for (levels, &label) in self.train_levels.chunks_exact(m).zip(&self.train_labels) {
                let c = label as usize;
                encode_block(levels, &im, start..end, &mut classes[c * w..(c + 1) * w]);
            }
            for (c, hv) in classes.chunks_exact(w).enumerate() {
                norms[c] += dot(hv, hv);
            }
            let query = &mut query[..w];
            for (i, levels) in self.test_levels.chunks_exact(m).enumerate() {
                query.fill(0);
                encode_block(levels, &im, start..end, query);
                for (c, hv) in classes.chunks_exact(w).enumerate() {
                    dots[i * k + c] += dot(query, hv);
                }
            }
        }

        let correct = dots
            .chunks_exact(k)
            .zip(&self.test_labels)
            .filter(|(d, &label)| argmax_scores(d, &norms) == label as usize)
            .count();
        Ok(ExactAccuracy::new(correct as u32, n_test as u32))
    }
}

const DIM_BLOCK: usize = 1024;

fn encode_block(levels: &[u16], im: &ItemMemory, range: std::ops::Range<usize>, acc: &mut [i32]) {
    for (id, &level) in im.id_hvs().iter().zip(levels) {
        let id = &id.as_slice()[range.clone()];
        let lv = &im.level_hvs()[usize::from(level)].as_slice()[range.clone()];
        for ((a, &x), &y) in acc.iter_mut().zip(id).zip(lv) {
            *a += i32::from(x * y);
        }
    }
}

/// Runs one nonce end to end from the raw datasets.
pub fn nonce_trial(nonce: u32, train: &Dataset, test: &Dataset, difficulty: &Difficulty) -> Result<ExactAccuracy, HdcError> {
    PreparedTask::new(train, test, difficulty.num_levels)?.trial(nonce, difficulty.dimension as usize)
}

/// Is `candidate` a better winner than `incumbent`? Higher accuracy, then smaller nonce.
fn beats(candidate: &TrialRecord, incumbent: &TrialRecord) -> bool {
    match candidate.accuracy.cmp_value(&incumbent.accuracy) {
        Ordering::Greater => true,
        Ordering::Equal => candidate.nonce < incumbent.nonce,
        Ordering::Less => false,
    }
}

fn summarize(trials: &[TrialRecord]) -> MiningResult {
    let mut best = 0;
    for (i, t) in trials.iter().enumerate().skip(1) {
        if beats(t, &trials[best]) {
            best = i;
        }
    }
    let total: Duration = trials.iter().map(|t| t.elapsed).sum();
    MiningResult {
        nonce: trials[best].nonce,
        accuracy: trials[best].accuracy,
        nonce_time: total.as_secs_f64() / trials.len() as f64,
        trials_used: trials.len() as u32,
        found_at: best as u32 + 1,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MineOptions {
    /// Stop after the first trial (in stream order) that meets the threshold.
    pub stop_at_threshold: bool,
    /// Wall-clock limit. Results under a limit depend on machine speed.
    pub time_limit: Option<Duration>,
}

/// A miner with its own worker pool.
pub struct Miner {
    pool: Option<rayon::ThreadPool>,
}

impl Miner {
    /// `threads <= 1` evaluates trials on the calling thread.
    pub fn new(threads: usize) -> Self {
        let pool = (threads > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("failed to build mining thread pool")
        });
        Self { pool }
    }

    pub fn threads(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    fn run_trials(&self, prepared: &PreparedTask, nonces: &[u32], dim: usize) -> Result<Vec<TrialRecord>, HdcError> {
        let one = |&nonce: &u32| -> Result<TrialRecord, HdcError> {
            let start = Instant::now();
            let accuracy = prepared.trial(nonce, dim)?;
            Ok(TrialRecord {
                nonce,
                accuracy,
                elapsed: start.elapsed(),
            })
        };
        match &self.pool {
            Some(pool) => pool.install(|| nonces.par_iter().map(one).collect()),
            None => nonces.iter().map(one).collect(),
        }
    }

    pub fn mine(&self, task: &MiningTask, prepared: &PreparedTask) -> Result<MiningOutcome, HdcError> {
        self.mine_with(task, prepared, MineOptions::default())
    }

    pub fn mine_with(&self, task: &MiningTask, prepared: &PreparedTask, opts: MineOptions) -> Result<MiningOutcome, HdcError> {
        if task.nonce_budget == 0 {
            return Err(HdcError::Config("nonce budget must be at least 1".into()));
        }
        if prepared.num_levels() != task.difficulty.num_levels as usize {
            return Err(HdcError::Config(format!(
                "task prepared for {} levels but difficulty asks for {}",
                prepared.num_levels(),
                task.difficulty.num_levels
            )));
        }
        let dim = task.difficulty.dimension as usize;
        let nonces = task.nonces();
        let trials = if !opts.stop_at_threshold && opts.time_limit.is_none() {
            self.run_trials(prepared, &nonces, dim)?
        } else {
            let started = Instant::now();
            let chunk = self.threads().max(1);
            let mut trials = Vec::new();
            for batch in nonces.chunks(chunk) {
                trials.extend(self.run_trials(prepared, batch, dim)?);
                if opts.stop_at_threshold {
                    let threshold = task.difficulty.accuracy_threshold;
                    if let Some(hit) = trials.iter().position(|t| t.accuracy.meets(threshold)) {
                        trials.truncate(hit + 1);
                        break;
                    }
                }
                if opts.time_limit.is_some_and(|limit| started.elapsed() >= limit) {
                    break;
                }
            }
            trials
        };
        Ok(MiningOutcome {
            result: summarize(&trials),
            trials,
        })
    }
}

/// Single-threaded mining straight from the datasets.
pub fn mine(task: &MiningTask, train: &Dataset, test: &Dataset) -> Result<MiningResult, HdcError> {
    let prepared = PreparedTask::new(train, test, task.difficulty.num_levels)?;
    Ok(Miner::new(1).mine(task, &prepared)?.result)
}

/// Median wall-clock seconds of `samples` full trials, each starting from the
/// raw datasets.
pub fn measure_nonce_time(task: &MiningTask, train: &Dataset, test: &Dataset, samples: usize) -> Result<f64, HdcError> {
    let samples = samples.max(1);
    let mut times = Vec::with_capacity(samples);
    for i in 0..samples {
        let nonce = task.strategy.nonce_at(task.offset + i as u64);
        let start = Instant::now();
        nonce_trial(nonce, train, test, &task.difficulty)?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    Ok(if times.len() % 2 == 1 {
        times[mid]
    } else {
        (times[mid - 1] + times[mid]) / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, split, SyntheticSpec};
    use crate::hdc::{encode, evaluate, train, EncodingConfig, IntHv};
    use num_rational::Ratio;

    fn small_task() -> TaskData {
        let ds = generate_synthetic(&SyntheticSpec {
            classes: 3,
            features: 6,
            samples_per_class: 20,
            separation: 1.0,
            noise: 1.0,
            seed: 3,
        })
        .unwrap();
        let (train, test) = split(&ds, Ratio::new(1, 2), 1).unwrap();
        TaskData::new(train, test).unwrap()
    }

    fn difficulty(dim: u32) -> Difficulty {
        Difficulty {
            dimension: dim,
            accuracy_threshold: Ratio::new(0, 1),
            num_levels: 8,
        }
    }

    #[test]
    fn fused_trial_matches_public_pipeline() {
        let data = small_task();
        // 2500 spans two full blocks and a partial one.
        for dim in [256u32, 1024, 2500] {
            let diff = difficulty(dim);
            let config = EncodingConfig::from_rows(dim as usize, 8, data.train.rows()).unwrap();
            for nonce in [0u32, 1, 77, u32::MAX] {
                let im = gen_item_memory(nonce, &config, data.train.num_features()).unwrap();
                let enc = |ds: &Dataset| -> Vec<(IntHv, usize)> {
                    ds.rows()
                        .zip(ds.labels())
                        .map(|(r, &l)| (encode(r, &im, &config).unwrap(), l as usize))
                        .collect()
                };
                let am = train(&enc(&data.train), data.train.num_classes()).unwrap();
                let expected = evaluate(&am, &enc(&data.test)).unwrap();
                assert_eq!(nonce_trial(nonce, &data.train, &data.test, &diff).unwrap(), expected);
            }
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let data = small_task();
        let a = nonce_trial(5, &data.train, &data.test, &difficulty(300)).unwrap();
        let b = nonce_trial(5, &data.train, &data.test, &difficulty(300)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn strategies() {
        let seq = NonceStrategy::Sequential { start: u32::MAX - 1 };
        assert_eq!(seq.window(0, 3), vec![u32::MAX - 1, u32::MAX, 0]);
        assert_eq!(seq.window(2, 1), vec![0]);
        let rnd = NonceStrategy::Random { seed: 11 };
        let all = rnd.window(0, 8);
        assert_eq!(rnd.window(3, 5), all[3..].to_vec());
        assert_eq!(all[0], (SplitMix64::new(11).next_u64() >> 32) as u32);
    }

    #[test]
    fn budget_one_is_a_single_trial() {
        let data = small_task();
        let task = MiningTask::new(data.hash(), difficulty(200), 1, NonceStrategy::Sequential { start: 9 });
        let res = mine(&task, &data.train, &data.test).unwrap();
        assert_eq!(res.nonce, 9);
        assert_eq!(res.trials_used, 1);
        assert_eq!(res.found_at, 1);
        assert_eq!(res.accuracy, nonce_trial(9, &data.train, &data.test, &task.difficulty).unwrap());
    }

    #[test]
    fn winner_is_exhaustive_argmax() {
        let data = small_task();
        let diff = difficulty(128);
        let task = MiningTask::new(data.hash(), diff, 8, NonceStrategy::Sequential { start: 0 });
        let res = mine(&task, &data.train, &data.test).unwrap();
        let scan: Vec<(u32, ExactAccuracy)> = (0..8)
            .map(|n| (n, nonce_trial(n, &data.train, &data.test, &diff).unwrap()))
            .collect();
        let best = scan.iter().map(|(_, a)| a.correct).max().unwrap();
        let winner = scan.iter().find(|(_, a)| a.correct == best).unwrap().0;
        assert_eq!((res.nonce, res.accuracy.correct), (winner, best));
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let data = small_task();
        let prepared = PreparedTask::from_task(&data, 8).unwrap();
        let task = MiningTask::new(data.hash(), difficulty(128), 12, NonceStrategy::Random { seed: 4 });
        let one = Miner::new(1).mine(&task, &prepared).unwrap();
        let four = Miner::new(4).mine(&task, &prepared).unwrap();
        assert_eq!(one.result.nonce, four.result.nonce);
        assert_eq!(one.result.accuracy, four.result.accuracy);
        let accs = |o: &MiningOutcome| o.trials.iter().map(|t| (t.nonce, t.accuracy)).collect::<Vec<_>>();
        assert_eq!(accs(&one), accs(&four));
    }

    #[test]
    fn running_best_is_monotone() {
        let data = small_task();
        let prepared = PreparedTask::from_task(&data, 8).unwrap();
        let task = MiningTask::new(data.hash(), difficulty(64), 16, NonceStrategy::Sequential { start: 0 });
        let outcome = Miner::new(2).mine(&task, &prepared).unwrap();
        let curve = outcome.best_curve(&[1, 2, 4, 8, 16]);
        assert_eq!(curve.len(), 5);
        for w in curve.windows(2) {
            assert_ne!(w[1].1.cmp_value(&w[0].1), Ordering::Less);
        }
        assert_eq!(curve[4].1, outcome.result.accuracy);
    }

    #[test]
    fn threshold_stop_is_thread_independent() {
        let data = small_task();
        let prepared = PreparedTask::from_task(&data, 8).unwrap();
        let mut diff = difficulty(64);
        diff.accuracy_threshold = Ratio::new(1, 2);
        let task = MiningTask::new(data.hash(), diff, 32, NonceStrategy::Sequential { start: 0 });
        let opts = MineOptions {
            stop_at_threshold: true,
            time_limit: None,
        };
        let a = Miner::new(1).mine_with(&task, &prepared, opts).unwrap();
        let b = Miner::new(3).mine_with(&task, &prepared, opts).unwrap();
        assert_eq!(a.trials.len(), b.trials.len());
        assert_eq!(a.result.nonce, b.result.nonce);
        if a.trials.len() < 32 {
            assert!(a.trials.last().unwrap().accuracy.meets(diff.accuracy_threshold));
        }
    }

    #[test]
    fn zero_budget_rejected() {
        let data = small_task();
        let task = MiningTask::new(data.hash(), difficulty(64), 0, NonceStrategy::default());
        assert!(mine(&task, &data.train, &data.test).is_err());
    }

    #[test]
    fn tie_prefers_smaller_nonce() {
        let rec = |nonce, c| TrialRecord {
            nonce,
            accuracy: ExactAccuracy::new(c, 10),
            elapsed: Duration::ZERO,
        };
        let res = summarize(&[rec(9, 7), rec(5, 7), rec(6, 3)]);
        assert_eq!((res.nonce, res.found_at), (5, 2));
    }
}

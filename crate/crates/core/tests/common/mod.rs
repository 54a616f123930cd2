#![allow(dead_code)]

pub mod oracle;

use std::sync::Arc;

use hdcoin::chain::{ChainParams, Difficulty, Validator};
use hdcoin::consensus::{AgentSpec, Behavior, ClockMode, SimConfig};
use hdcoin::dataset::{generate_synthetic, split, Dataset, SyntheticSpec, TaskData};
use hdcoin::miner::NonceStrategy;
use num_rational::Ratio;

pub fn blobs(classes: usize, features: usize, per_class: usize, separation: f64, noise: f64, seed: u64) -> Arc<TaskData> {
    let full = generate_synthetic(&SyntheticSpec {
        classes,
        features,
        samples_per_class: per_class,
        separation,
        noise,
        seed,
    })
    .unwrap();
    let (train, test) = split(&full, Ratio::new(1, 2), seed).unwrap();
    Arc::new(TaskData::new(train, test).unwrap())
}

/// Small task used by the chain and consensus tests.
pub fn small_task() -> Arc<TaskData> {
    blobs(3, 8, 30, 1.0, 1.0, 11)
}

pub fn rows(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.rows().map(<[f64]>::to_vec).collect()
}

/// Oracle accuracy for `nonce` on `task`.
pub fn oracle_trial(task: &TaskData, nonce: u32, d: usize, l: usize) -> (u32, u32) {
    oracle::trial(
        nonce,
        d,
        l,
        task.train.num_classes(),
        &rows(&task.train),
        task.train.labels(),
        &rows(&task.test),
        task.test.labels(),
    )
}

/// Fast params: a short ladder starting at d=1000.
pub fn params(task: &TaskData) -> ChainParams {
    ChainParams {
        ladder: vec![1000, 2000, 3000],
        initial: Difficulty {
            dimension: 1000,
            accuracy_threshold: Ratio::new(1, 2),
            num_levels: 10,
        },
        t_low_ms: 0,
        t_high_ms: u64::MAX,
        ..ChainParams::new(task.hash())
    }
}

pub fn validator(task: &Arc<TaskData>) -> Validator {
    Validator::new(params(task), Arc::clone(task)).unwrap()
}

pub fn agent(id: &str, budget: u32, seed: u64) -> AgentSpec {
    AgentSpec {
        id: id.into(),
        budget,
        strategy: NonceStrategy::Random { seed },
        behavior: Behavior::Honest,
    }
}

pub fn sim(agents: Vec<AgentSpec>, rounds: u32) -> SimConfig {
    SimConfig {
        agents,
        rounds,
        tx_seed: 5,
        txs_per_round: 4,
        clock: ClockMode::Work { ops_per_ms: 100_000 },
        max_floor_repeats: 16,
    }
}

mod common;

use common::{blobs, oracle, oracle_trial};
use hdcoin::chain::Difficulty;
use hdcoin::dataset::{Dataset, TaskData};
use hdcoin::hdc::{gen_item_memory, EncodingConfig};
use hdcoin::miner::{nonce_trial, PreparedTask};
use num_rational::Ratio;
use proptest::prelude::*;

#[test]
fn item_memory_matches_oracle() {
    for (nonce, d, m, l) in [(0u32, 4usize, 1usize, 2usize), (7, 100, 3, 5), (u32::MAX, 64, 2, 10)] {
        let cfg = EncodingConfig::new(d, l, vec![(0.0, 1.0); m]).unwrap();
        let im = gen_item_memory(nonce, &cfg, m).unwrap();
        let o = oracle::memory(nonce, d, m, l);
        for j in 0..m {
            let ours: Vec<f64> = im.id_hvs()[j].as_slice().iter().map(|&x| x as f64).collect();
            assert_eq!(ours, o.ids[j]);
        }
        for i in 0..l {
            let ours: Vec<f64> = im.level_hvs()[i].as_slice().iter().map(|&x| x as f64).collect();
            assert_eq!(ours, o.levels[i], "nonce {nonce} level {i}");
        }
    }
}

fn tiny_task(k: usize, train_rows: Vec<Vec<f64>>, test_rows: Vec<Vec<f64>>) -> TaskData {
    let label = |i: usize| (i % k) as u32;
    let mk = |name: &str, rows: &[Vec<f64>]| {
        let labels: Vec<u32> = (0..rows.len()).map(label).collect();
        Dataset::new(name, rows.to_vec(), labels, k).unwrap()
    };
    TaskData::new(mk("train", &train_rows), mk("test", &test_rows)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trial_matches_oracle(
        nonce in any::<u32>(),
        d in 18usize..200,
        l in 2usize..10,
        k in 2usize..4,
        m in 1usize..5,
        seed in any::<u64>(),
    ) {
        let mut rng = oracle::Splitmix(seed);
        let mut row = |_| (0..m).map(|_| (rng.next() % 21) as f64 / 4.0 - 2.5).collect::<Vec<f64>>();
        let train: Vec<Vec<f64>> = (0..3 * k).map(&mut row).collect();
        let test: Vec<Vec<f64>> = (0..2 * k).map(&mut row).collect();
        let task = tiny_task(k, train, test);
        let prepared = PreparedTask::from_task(&task, l as u32).unwrap();
        let ours = prepared.trial(nonce, d).unwrap();
        let (c, t) = oracle_trial(&task, nonce, d, l);
        prop_assert_eq!((ours.correct, ours.total), (c, t));
    }
}

#[test]
fn fused_and_reference_paths_agree_on_blobs() {
    let task = blobs(4, 10, 20, 1.0, 1.0, 3);
    let prepared = PreparedTask::from_task(&task, 8).unwrap();
    for (nonce, dim) in [(0u32, 1000u32), (1, 1024), (99, 2500), (123_456, 3000)] {
        let diff = Difficulty {
            dimension: dim,
            accuracy_threshold: Ratio::new(1, 2),
            num_levels: 8,
        };
        let a = prepared.trial(nonce, dim as usize).unwrap();
        let b = nonce_trial(nonce, &task.train, &task.test, &diff).unwrap();
        let (c, t) = oracle_trial(&task, nonce, dim as usize, 8);
        assert_eq!(a, b);
        assert_eq!((a.correct, a.total), (c, t), "nonce {nonce} d {dim}");
    }
}

#[test]
fn separated_blobs_are_learned_by_any_nonce() {
    let task = blobs(3, 12, 40, 4.0, 0.5, 21);
    let prepared = PreparedTask::from_task(&task, 10).unwrap();
    for nonce in [0u32, 1, 2, 0xdead_beef, u32::MAX] {
        let acc = prepared.trial(nonce, 3000).unwrap();
        assert!(acc.meets(Ratio::new(95, 100)), "nonce {nonce}: {acc}");
    }
}

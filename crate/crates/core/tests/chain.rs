mod common;

use common::{agent, sim, small_task, validator};
use hdcoin::chain::{load_chain, save_chain, Block, Chain, Violation};
use hdcoin::consensus::run_simulation;
use hdcoin::hdc::ExactAccuracy;

fn five_blocks() -> (hdcoin::chain::Validator, Vec<Block>) {
    let task = small_task();
    let v = validator(&task);
    let report = run_simulation(&sim(vec![agent("a", 3, 1), agent("b", 3, 2)], 5), &v, 1).unwrap();
    let blocks = report.chain.blocks().to_vec();
    (v, blocks)
}

#[test]
fn five_block_chain_is_valid_and_linked() {
    let (v, blocks) = five_blocks();
    assert_eq!(blocks.len(), 6);
    v.validate_chain(&blocks).unwrap();
    for w in blocks.windows(2) {
        assert_eq!(w[1].header.prev_hash, w[0].hash);
        assert!(w[1].header.timestamp > w[0].header.timestamp);
        assert!(w[1].transactions[0].is_coinbase());
    }
}

#[test]
fn tampering_is_caught_at_its_height() {
    let (v, blocks) = five_blocks();
    let mut bad = blocks.clone();
    bad[2].header.nonce ^= 1;
    let err = v.validate_chain(&bad).unwrap_err();
    assert_eq!(err.height, 2);
    assert!(err.violations.contains(&Violation::HashMismatch));

    let mut bad = blocks.clone();
    bad[2].transactions[1].amount += 1;
    let err = v.validate_chain(&bad).unwrap_err();
    assert_eq!(err.height, 2);
    assert!(err.violations.contains(&Violation::MalformedTx));
}

#[test]
fn reload_round_trip() {
    let (v, blocks) = five_blocks();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.jsonl");
    save_chain(&blocks, &path).unwrap();
    let back = load_chain(&path).unwrap();
    assert_eq!(back, blocks);
    let chain = Chain::from_blocks(back, &v).unwrap();
    assert_eq!(chain.height(), 5);
}

#[test]
fn honest_inflated_and_edited_blocks() {
    let (v, blocks) = five_blocks();
    let history = &blocks[..3];
    let honest = &blocks[3];
    assert!(v.validate_block(honest, history).is_empty());

    let mut header = honest.header.clone();
    let claim = header.accuracy_claim;
    header.accuracy_claim = ExactAccuracy::new(claim.correct + 1, claim.total);
    let inflated = Block::seal(header, honest.transactions.clone());
    assert_eq!(v.validate_block(&inflated, history), vec![Violation::PouwMismatch]);

    let mut edited = honest.clone();
    edited.transactions[1].amount += 1;
    edited.transactions[1].tx_id = edited.transactions[1].compute_id();
    assert_eq!(v.validate_block(&edited, history), vec![Violation::MerkleMismatch]);
}

#[test]
fn append_rejects_a_stale_parent() {
    let (v, blocks) = five_blocks();
    let mut chain = Chain::from_blocks(blocks[..4].to_vec(), &v).unwrap();
    let err = chain.append_block(blocks[2].clone(), &v).unwrap_err();
    assert_eq!(err.height, 4);
    assert_eq!(chain.height(), 3);
    chain.append_block(blocks[4].clone(), &v).unwrap();
}

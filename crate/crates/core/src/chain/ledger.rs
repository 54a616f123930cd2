use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use num_rational::Ratio;
use thiserror::Error;

use super::difficulty::threshold_allowed;
use super::{hash_header, merkle_root, next_difficulty, Block, BlockHeader, ChainError, ChainParams, Difficulty};
use crate::dataset::TaskData;
use crate::hdc::{ExactAccuracy, HdcError};
use crate::miner::PreparedTask;

/// A named reason a block fails validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Violation {
    GenesisMismatch,
    HashMismatch,
    HeightMismatch,
    PrevHashMismatch,
    MerkleMismatch,
    TimestampNotIncreasing,
    DifficultyMismatch,
    DatasetMismatch,
    BlockTooLarge,
    DuplicateTx,
    MalformedTx,
    CoinbaseInvalid,
    PouwMismatch,
    BelowThreshold,
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::GenesisMismatch => "genesis_mismatch",
            Violation::HashMismatch => "hash_mismatch",
            Violation::HeightMismatch => "height_mismatch",
            Violation::PrevHashMismatch => "prev_hash_mismatch",
            Violation::MerkleMismatch => "merkle_mismatch",
            Violation::TimestampNotIncreasing => "timestamp_not_increasing",
            Violation::DifficultyMismatch => "difficulty_mismatch",
            Violation::DatasetMismatch => "dataset_mismatch",
            Violation::BlockTooLarge => "block_too_large",
            Violation::DuplicateTx => "duplicate_tx",
            Violation::MalformedTx => "malformed_tx",
            Violation::CoinbaseInvalid => "coinbase_invalid",
            Violation::PouwMismatch => "pouw_mismatch",
            Violation::BelowThreshold => "below_threshold",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The first invalid block of a chain and everything wrong with it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("block at height {height} is invalid: {}", names(.violations))]
pub struct ChainViolation {
    pub height: u64,
    pub violations: Vec<Violation>,
}

fn names(v: &[Violation]) -> String {
    v.iter().map(Violation::name).collect::<Vec<_>>().join(", ")
}

/// Re-checks blocks against the consensus parameters and the mining task.
pub struct Validator {
    params: ChainParams,
    task: Arc<TaskData>,
    baseline: Ratio<u32>,
    prepared: Mutex<HashMap<u32, Arc<PreparedTask>>>,
}

impl Validator {
    pub fn new(params: ChainParams, task: Arc<TaskData>) -> Result<Self, ChainError> {
        params.validate()?;
        if params.dataset_hash != task.hash() {
            return Err(ChainError::Params(format!(
                "chain is bound to dataset {} but the task hashes to {}",
                params.dataset_hash,
                task.hash()
            )));
        }
        let baseline = task.majority_baseline();
        Ok(Self {
            params,
            task,
            baseline,
            prepared: Mutex::new(HashMap::new()),
        })
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn task(&self) -> &Arc<TaskData> {
        &self.task
    }

    pub fn baseline(&self) -> Ratio<u32> {
        self.baseline
    }

    pub fn prepared(&self, num_levels: u32) -> Result<Arc<PreparedTask>, HdcError> {
        let mut cache = self.prepared.lock().expect("prepared cache poisoned");
        if let Some(p) = cache.get(&num_levels) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(PreparedTask::from_task(&self.task, num_levels)?);
        cache.insert(num_levels, Arc::clone(&p));
        Ok(p)
    }

    pub fn genesis(&self) -> Block {
        Block::seal(
            BlockHeader {
                height: 0,
                prev_hash: [0; 32],
                merkle_root: [0; 32],
                dataset_hash: self.params.dataset_hash,
                nonce: 0,
                accuracy_claim: ExactAccuracy::new(0, 0),
                difficulty: self.params.initial,
                timestamp: self.params.genesis_timestamp,
            },
            Vec::new(),
        )
    }

    /// Difficulty the block after `history` must carry (before any decay).
    pub fn expected_difficulty(&self, history: &[Block]) -> Difficulty {
        let start = history.len().saturating_sub(self.params.window + 1);
        let headers: Vec<BlockHeader> = history[start..].iter().map(|b| b.header.clone()).collect();
        next_difficulty(&headers, &self.params, self.baseline)
    }

    /// Recomputes the trial for `nonce` at `difficulty`.
    pub fn recompute(&self, nonce: u32, difficulty: &Difficulty) -> Result<ExactAccuracy, HdcError> {
        self.prepared(difficulty.num_levels)?
            .trial(nonce, difficulty.dimension as usize)
    }

    fn difficulty_ok(&self, actual: &Difficulty, expected: &Difficulty) -> bool {
        actual.dimension == expected.dimension
            && actual.num_levels == expected.num_levels
            && threshold_allowed(
                actual.accuracy_threshold,
                expected.accuracy_threshold,
                self.baseline,
                self.params.decay_step,
            )
    }

    /// Every check applied to `block` given the chain before it (`history`
    /// ends with the parent). An empty result means the block is valid.
    pub fn validate_block(&self, block: &Block, history: &[Block]) -> Vec<Violation> {
        let mut out = Vec::new();
        let h = &block.header;
        if block.hash != hash_header(h) {
            out.push(Violation::HashMismatch);
        }
        let Some(parent) = history.last() else {
            if *block != self.genesis() {
                out.push(Violation::GenesisMismatch);
            }
            return out;
        };
        if h.height != parent.header.height + 1 {
            out.push(Violation::HeightMismatch);
        }
        if h.prev_hash != parent.hash {
            out.push(Violation::PrevHashMismatch);
        }
        if h.merkle_root != merkle_root(&block.transactions) {
            out.push(Violation::MerkleMismatch);
        }
        if h.timestamp <= parent.header.timestamp {
            out.push(Violation::TimestampNotIncreasing);
        }
        let expected = self.expected_difficulty(history);
        let difficulty_ok = self.difficulty_ok(&h.difficulty, &expected);
        if !difficulty_ok {
            out.push(Violation::DifficultyMismatch);
        }
        if h.dataset_hash != self.params.dataset_hash {
            out.push(Violation::DatasetMismatch);
        }
        if block.transactions.len() > self.params.max_block_txs {
            out.push(Violation::BlockTooLarge);
        }
        let mut ids = HashSet::new();
        if !block.transactions.iter().all(|t| ids.insert(t.tx_id)) {
            out.push(Violation::DuplicateTx);
        }
        if !block.transactions.iter().all(|t| t.is_well_formed()) {
            out.push(Violation::MalformedTx);
        }
        let coinbase_ok = match block.transactions.split_first() {
            Some((cb, rest)) => {
                cb.is_coinbase()
                    && cb.coinbase_height() == Some(h.height)
                    && cb.amount == self.params.reward
                    && !rest.iter().any(|t| t.is_coinbase())
            }
            None => false,
        };
        if !coinbase_ok {
            out.push(Violation::CoinbaseInvalid);
        }

        // The trial is only meaningful (and only safe to size) for a valid difficulty.
        if difficulty_ok {
            let claim = h.accuracy_claim;
            let recomputed = if claim.total as usize == self.task.test.len() {
                self.recompute(h.nonce, &h.difficulty).ok()
            } else {
                None
            };
            if recomputed != Some(claim) {
                out.push(Violation::PouwMismatch);
            } else if !claim.meets(h.difficulty.accuracy_threshold) {
                out.push(Violation::BelowThreshold);
            }
        }
        out
    }

    /// Full re-validation from genesis; reports the first invalid height.
    pub fn validate_chain(&self, blocks: &[Block]) -> Result<(), ChainViolation> {
        for (i, block) in blocks.iter().enumerate() {
            let violations = self.validate_block(block, &blocks[..i]);
            if !violations.is_empty() {
                return Err(ChainViolation {
                    height: i as u64,
                    violations,
                });
            }
        }
        if blocks.is_empty() {
            return Err(ChainViolation {
                height: 0,
                violations: vec![Violation::GenesisMismatch],
            });
        }
        Ok(())
    }
}

/// An in-memory chain that only ever grows by validated blocks.
#[derive(Debug, Clone)]
pub struct Chain {
    blocks: Vec<Block>,
}

impl Chain {
    pub fn new(validator: &Validator) -> Self {
        Self {
            blocks: vec![validator.genesis()],
        }
    }

    pub fn from_blocks(blocks: Vec<Block>, validator: &Validator) -> Result<Self, ChainViolation> {
        validator.validate_chain(&blocks)?;
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain always holds genesis")
    }

    pub fn height(&self) -> u64 {
        self.tip().header.height
    }

    pub fn append_block(&mut self, block: Block, validator: &Validator) -> Result<(), ChainViolation> {
        let violations = validator.validate_block(&block, &self.blocks);
        if !violations.is_empty() {
            // The position it was offered at, as in `validate_chain`.
            return Err(ChainViolation {
                height: self.blocks.len() as u64,
                violations,
            });
        }
        self.blocks.push(block);
        Ok(())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ChainError + '_ {
    move |source| ChainError::Io {
        path: path.to_owned(),
        source,
    }
}

fn record(block: &Block) -> String {
    serde_json::to_string(block).expect("block serialization cannot fail")
}

/// Writes the chain as one JSON record per line.
pub fn save_chain(blocks: &[Block], path: &Path) -> Result<(), ChainError> {
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for b in blocks {
        writeln!(out, "{}", record(b)).map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn append_block_record(path: &Path, block: &Block) -> Result<(), ChainError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    writeln!(f, "{}", record(block)).map_err(io_err(path))
}

pub fn load_chain(path: &Path) -> Result<Vec<Block>, ChainError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut blocks = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let block: Block = serde_json::from_str(&line).map_err(|e| ChainError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        blocks.push(block);
    }
    Ok(blocks)
}

//! In-process multi-miner network.
//!
//! Agents mine the same task, the best verified claim wins, and the block is
//! sealed only after every agent has re-run the winning nonce and agreed.

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, Write};
use std::time::Instant;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Block, BlockHeader, Chain, ChainError, ChainViolation, Difficulty, Mempool, Transaction, Validator};
use crate::hdc::{ExactAccuracy, HdcError};
use crate::miner::{Miner, MiningResult, MiningTask, NonceStrategy, PreparedTask};
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Hdc(#[from] HdcError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("sealed block failed validation (bug): {0}")]
    SealedInvalid(ChainViolation),
    #[error("round for height {height} stalled: no verified claim reached the floor threshold {threshold}")]
    Stalled { height: u64, threshold: Ratio<u32> },
    #[error("invalid simulation config: {0}")]
    Config(String),
}

/// What an agent reports after mining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    #[default]
    Honest,
    /// Reports `extra` more correct predictions than it actually achieved.
    InflateAccuracy { extra: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    pub budget: u32,
    pub strategy: NonceStrategy,
    #[serde(default)]
    pub behavior: Behavior,
}

#[derive(Debug, Clone)]
pub struct MinerAgent {
    spec: AgentSpec,
    cursor: u64,
}

impl MinerAgent {
    pub fn new(spec: AgentSpec) -> Self {
        Self { spec, cursor: 0 }
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn spec(&self) -> &AgentSpec {
        &self.spec
    }

    fn report(&self, honest: MiningResult) -> MiningResult {
        match self.spec.behavior {
            Behavior::Honest => honest,
            Behavior::InflateAccuracy { extra } => {
                let acc = honest.accuracy;
                MiningResult {
                    accuracy: ExactAccuracy::new(acc.correct.saturating_add(extra).min(acc.total), acc.total),
                    ..honest
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    PouwMismatch,
    BelowThreshold,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::PouwMismatch => "pouw_mismatch",
            RejectReason::BelowThreshold => "below_threshold",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

/// Re-runs the claimed nonce and compares `(correct, total)` exactly, then
/// checks the threshold.
pub fn verify_claim(result: &MiningResult, difficulty: &Difficulty, prepared: &PreparedTask) -> Result<Verdict, HdcError> {
    let actual = prepared.trial(result.nonce, difficulty.dimension as usize)?;
    if actual != result.accuracy {
        return Ok(Verdict::Reject(RejectReason::PouwMismatch));
    }
    if !actual.meets(difficulty.accuracy_threshold) {
        return Ok(Verdict::Reject(RejectReason::BelowThreshold));
    }
    Ok(Verdict::Accept)
}

/// One agent's best claim so far in a round.
#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub miner_id: String,
    pub result: MiningResult,
}

/// Winner ordering: higher accuracy, then earlier logical submission time
/// (trials consumed before the best was found), then smaller nonce, then miner id.
fn rank(a: &Submission, b: &Submission) -> Ordering {
    b.result
        .accuracy
        .cmp_value(&a.result.accuracy)
        .then(a.result.found_at.cmp(&b.result.found_at))
        .then(a.result.nonce.cmp(&b.result.nonce))
        .then(a.miner_id.cmp(&b.miner_id))
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub winner: String,
    pub winning_result: MiningResult,
    pub all_results: Vec<Submission>,
    pub verifications: Vec<(String, Verdict)>,
    /// Candidates disqualified before the winner was accepted.
    pub rejected: Vec<(String, RejectReason)>,
    pub difficulty: Difficulty,
    pub repeats: u32,
    pub sealed_block: Block,
    pub wall_ms: u64,
}

/// How block timestamps advance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClockMode {
    /// Deterministic: each round lasts its modelled work divided by a fixed
    /// throughput in element operations per millisecond.
    Work { ops_per_ms: u64 },
    /// Real elapsed time. Chains are no longer reproducible.
    Wall,
}

impl Default for ClockMode {
    fn default() -> Self {
        ClockMode::Work { ops_per_ms: 1_000_000 }
    }
}

/// Everything the round driver needs besides the agents.
pub struct RoundContext<'a> {
    pub validator: &'a Validator,
    pub miner: &'a Miner,
    pub clock: ClockMode,
    /// Extra attempts allowed once the threshold has hit its floor.
    pub max_floor_repeats: u32,
}

fn trial_cost(dim: u32, prepared_shape: (usize, usize, usize, usize)) -> u64 {
    let (n_train, n_test, m, k) = prepared_shape;
    u64::from(dim) * ((n_train + n_test) as u64 * m as u64 + (n_test * k) as u64)
}

pub fn run_round(
    agents: &mut [MinerAgent],
    chain: &mut Chain,
    mempool: &Mempool,
    ctx: &RoundContext<'_>,
) -> Result<RoundOutcome, SimError> {
    if agents.is_empty() {
        return Err(SimError::Config("a round needs at least one agent".into()));
    }
    let started = Instant::now();
    let validator = ctx.validator;
    let params = validator.params();
    let task = validator.task();
    let expected = validator.expected_difficulty(chain.blocks());
    let floor = expected.accuracy_threshold.min(validator.baseline());
    let prepared = validator.prepared(expected.num_levels)?;
    let height = chain.height() + 1;

    let mut threshold = expected.accuracy_threshold;
    let mut best: Vec<Option<MiningResult>> = vec![None; agents.len()];
    let mut trials_in_round = vec![0u32; agents.len()];
    let mut time_in_round = vec![0f64; agents.len()];
    let mut rejected = Vec::new();
    let mut repeats = 0u32;
    let mut floor_repeats = 0u32;
    let mut work_trials = 0u64;

    loop {
        let difficulty = Difficulty {
            accuracy_threshold: threshold,
            ..expected
        };
        for (i, agent) in agents.iter_mut().enumerate() {
            let mining = MiningTask {
                dataset_hash: task.hash(),
                difficulty,
                nonce_budget: agent.spec.budget,
                strategy: agent.spec.strategy,
                offset: agent.cursor,
            };
            let outcome = ctx.miner.mine(&mining, &prepared)?;
            agent.cursor += u64::from(agent.spec.budget);
            let mut found = outcome.result;
            found.found_at += trials_in_round[i];
            trials_in_round[i] += found.trials_used;
            time_in_round[i] += found.nonce_time * f64::from(found.trials_used);
            let improves = match &best[i] {
                None => true,
                Some(prev) => match found.accuracy.cmp_value(&prev.accuracy) {
                    Ordering::Greater => true,
                    Ordering::Equal => found.nonce < prev.nonce,
                    Ordering::Less => false,
                },
            };
            if improves {
                best[i] = Some(found);
            }
        }
        work_trials += agents.iter().map(|a| u64::from(a.spec.budget)).max().unwrap_or(0);

        let submissions: Vec<Submission> = agents
            .iter()
            .zip(&best)
            .zip(trials_in_round.iter().zip(&time_in_round))
            .map(|((agent, res), (&trials, &secs))| {
                let res = res.expect("every agent mined at least once");
                Submission {
                    miner_id: agent.id().to_owned(),
                    result: agent.report(MiningResult {
                        trials_used: trials,
                        nonce_time: secs / f64::from(trials.max(1)),
                        ..res
                    }),
                }
            })
            .collect();

        let mut candidates: Vec<&Submission> = submissions
            .iter()
            .filter(|s| s.result.accuracy.meets(threshold))
            .collect();
        candidates.sort_by(|a, b| rank(a, b));

        for cand in candidates {
            let mut verifications = Vec::with_capacity(agents.len());
            for verifier in agents.iter() {
                let verdict = verify_claim(&cand.result, &difficulty, &prepared)?;
                verifications.push((verifier.id().to_owned(), verdict));
            }
            if let Some((_, Verdict::Reject(reason))) = verifications.iter().find(|(_, v)| !v.is_accept()) {
                rejected.push((cand.miner_id.clone(), *reason));
                continue;
            }

            let parent = chain.tip();
            let elapsed_ms = started.elapsed().as_millis() as u64;
            let interval = match ctx.clock {
                ClockMode::Work { ops_per_ms } => {
                    let shape = (task.train.len(), task.test.len(), task.train.num_features(), task.train.num_classes());
                    (work_trials * trial_cost(difficulty.dimension, shape)).div_ceil(ops_per_ms.max(1))
                }
                ClockMode::Wall => elapsed_ms,
            }
            .max(1);
            let timestamp = parent.header.timestamp + interval;
            let mut txs = vec![Transaction::coinbase(height, &cand.miner_id, params.reward, timestamp / 1000)?];
            txs.extend(mempool.take_txs(params.max_block_txs - 1));
            let block = Block::seal(
                BlockHeader {
                    height,
                    prev_hash: parent.hash,
                    merkle_root: [0; 32],
                    dataset_hash: task.hash(),
                    nonce: cand.result.nonce,
                    accuracy_claim: cand.result.accuracy,
                    difficulty,
                    timestamp,
                },
                txs,
            );
            chain
                .append_block(block.clone(), validator)
                .map_err(SimError::SealedInvalid)?;
            return Ok(RoundOutcome {
                winner: cand.miner_id.clone(),
                winning_result: cand.result,
                all_results: submissions.clone(),
                verifications,
                rejected,
                difficulty,
                repeats,
                sealed_block: block,
                wall_ms: started.elapsed().as_millis() as u64,
            });
        }

        if threshold == floor {
            floor_repeats += 1;
            if floor_repeats > ctx.max_floor_repeats {
                return Err(SimError::Stalled { height, threshold });
            }
        }
        threshold = crate::chain::decayed_threshold(threshold, params.decay_step, floor);
        repeats += 1;
    }
}

/// Seeded generator of toy transfers between a fixed set of accounts.
#[derive(Debug, Clone)]
pub struct TxGenerator {
    rng: SplitMix64,
    issued: u64,
    base_timestamp: u64,
}

const ACCOUNTS: [&str; 6] = ["alice", "bob", "carol", "dave", "erin", "frank"];

impl TxGenerator {
    pub fn new(seed: u64, base_timestamp: u64) -> Self {
        Self {
            rng: SplitMix64::new(seed),
            issued: 0,
            base_timestamp,
        }
    }

    pub fn next_tx(&mut self) -> Transaction {
        let from = self.rng.next_below(ACCOUNTS.len() as u64) as usize;
        let to = (from + 1 + self.rng.next_below(ACCOUNTS.len() as u64 - 1) as usize) % ACCOUNTS.len();
        let amount = 1 + self.rng.next_below(1000);
        // Strictly increasing timestamps keep every id distinct.
        let ts = self.base_timestamp + self.issued;
        self.issued += 1;
        Transaction::new(ACCOUNTS[from], ACCOUNTS[to], amount, ts).expect("amount is positive")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub agents: Vec<AgentSpec>,
    pub rounds: u32,
    #[serde(default)]
    pub tx_seed: u64,
    #[serde(default = "default_txs_per_round")]
    pub txs_per_round: u32,
    #[serde(default)]
    pub clock: ClockMode,
    #[serde(default = "default_floor_repeats")]
    pub max_floor_repeats: u32,
}

fn default_txs_per_round() -> u32 {
    8
}

fn default_floor_repeats() -> u32 {
    16
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.agents.is_empty() {
            return Err(SimError::Config("at least one agent is required".into()));
        }
        if self.rounds == 0 {
            return Err(SimError::Config("rounds must be at least 1".into()));
        }
        let mut ids: Vec<&str> = self.agents.iter().map(|a| a.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(SimError::Config(format!("duplicate agent id '{}'", w[0])));
        }
        if let Some(a) = self.agents.iter().find(|a| a.budget == 0) {
            return Err(SimError::Config(format!("agent '{}' has a zero budget", a.id)));
        }
        if let Some(a) = self.agents.iter().find(|a| a.id.is_empty() || a.id.contains(['|', ':', '\t', '\n'])) {
            return Err(SimError::Config(format!("agent id '{}' is empty or contains a reserved character", a.id)));
        }
        Ok(())
    }
}

/// Per-miner figures for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct MinerRoundStats {
    pub miner_id: String,
    pub best: ExactAccuracy,
    pub trials: u32,
    /// Mean wall seconds per trial; measurement only.
    pub nonce_time_wall: f64,
}

/// One record of the round log.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub round: u32,
    pub height: u64,
    pub winner: String,
    pub winning_nonce: u32,
    pub winning_accuracy: ExactAccuracy,
    pub dimension: u32,
    pub threshold: Ratio<u32>,
    pub num_levels: u32,
    pub repeats: u32,
    pub rejected: u32,
    pub block_interval_ms: u64,
    pub wall_ms: u64,
    pub miners: Vec<MinerRoundStats>,
}

pub const ROUND_LOG_HEADER: &str = "round\theight\twinner\twinning_nonce\twinning_accuracy\tdimension\tthreshold\tnum_levels\trepeats\trejected\tblock_interval_ms\twall_ms\tminers";

impl RoundLog {
    /// Tab-separated; the `miners` column is `id:correct/total:trials:wall_ms_per_trial`
    /// entries joined by `|`.
    pub fn to_tsv(&self) -> String {
        let miners = self
            .miners
            .iter()
            .map(|m| {
                format!(
                    "{}:{}/{}:{}:{:.3}",
                    m.miner_id,
                    m.best.correct,
                    m.best.total,
                    m.trials,
                    m.nonce_time_wall * 1000.0
                )
            })
            .collect::<Vec<_>>()
            .join("|");
        format!(
            "{}\t{}\t{}\t{}\t{}/{}\t{}\t{}/{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.round,
            self.height,
            self.winner,
            self.winning_nonce,
            self.winning_accuracy.correct,
            self.winning_accuracy.total,
            self.dimension,
            self.threshold.numer(),
            self.threshold.denom(),
            self.num_levels,
            self.repeats,
            self.rejected,
            self.block_interval_ms,
            self.wall_ms,
            miners
        )
    }

    pub fn parse_tsv(line: &str) -> Result<Self, String> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 13 {
            return Err(format!("expected 13 columns, found {}", cols.len()));
        }
        let num = |i: usize| -> Result<u64, String> {
            cols[i].parse().map_err(|_| format!("column {} ('{}') is not an integer", i + 1, cols[i]))
        };
        let acc = |s: &str| -> Result<ExactAccuracy, String> {
            let (c, t) = s.split_once('/').ok_or_else(|| format!("'{s}' is not correct/total"))?;
            Ok(ExactAccuracy::new(
                c.parse().map_err(|_| format!("bad count in '{s}'"))?,
                t.parse().map_err(|_| format!("bad count in '{s}'"))?,
            ))
        };
        let miners = if cols[12].is_empty() {
            Vec::new()
        } else {
            cols[12]
                .split('|')
                .map(|entry| {
                    let parts: Vec<&str> = entry.split(':').collect();
                    if parts.len() != 4 {
                        return Err(format!("bad miner entry '{entry}'"));
                    }
                    Ok(MinerRoundStats {
                        miner_id: parts[0].to_owned(),
                        best: acc(parts[1])?,
                        trials: parts[2].parse().map_err(|_| format!("bad trial count in '{entry}'"))?,
                        nonce_time_wall: parts[3].parse::<f64>().map_err(|_| format!("bad time in '{entry}'"))? / 1000.0,
                    })
                })
                .collect::<Result<_, _>>()?
        };
        Ok(Self {
            round: num(0)? as u32,
            height: num(1)?,
            winner: cols[2].to_owned(),
            winning_nonce: num(3)? as u32,
            winning_accuracy: acc(cols[4])?,
            dimension: num(5)? as u32,
            threshold: crate::chain::parse_raw_ratio(cols[6])?,
            num_levels: num(7)? as u32,
            repeats: num(8)? as u32,
            rejected: num(9)? as u32,
            block_interval_ms: num(10)?,
            wall_ms: num(11)?,
            miners,
        })
    }
}

pub fn write_round_log(log: &[RoundLog], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{ROUND_LOG_HEADER}")?;
    for r in log {
        writeln!(out, "{}", r.to_tsv())?;
    }
    Ok(())
}

pub fn parse_round_log(text: &str) -> Result<Vec<RoundLog>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with("round\t"))
        .map(|(i, l)| RoundLog::parse_tsv(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

pub struct SimReport {
    pub chain: Chain,
    pub log: Vec<RoundLog>,
    pub outcomes: Vec<RoundOutcome>,
}

/// Runs `config.rounds` rounds on a fresh chain. Given a work clock the chain
/// is a pure function of the config, the task and the seeds.
pub fn run_simulation(config: &SimConfig, validator: &Validator, threads: usize) -> Result<SimReport, SimError> {
    config.validate()?;
    let mut chain = Chain::new(validator);
    run_rounds(config, validator, threads, &mut chain, |_| Ok(()))
}

/// Extends `chain` by `config.rounds` blocks, calling `on_block` after each seal.
pub fn run_rounds(
    config: &SimConfig,
    validator: &Validator,
    threads: usize,
    chain: &mut Chain,
    mut on_block: impl FnMut(&RoundOutcome) -> Result<(), SimError>,
) -> Result<SimReport, SimError> {
    config.validate()?;
    let mut agents: Vec<MinerAgent> = config.agents.iter().cloned().map(MinerAgent::new).collect();
    let miner = Miner::new(threads);
    let ctx = RoundContext {
        validator,
        miner: &miner,
        clock: config.clock,
        max_floor_repeats: config.max_floor_repeats,
    };
    let mempool = Mempool::new();
    let mut txgen = TxGenerator::new(config.tx_seed, validator.params().genesis_timestamp / 1000);
    let mut log = Vec::new();
    let mut outcomes = Vec::new();
    for round in 0..config.rounds {
        for _ in 0..config.txs_per_round {
            mempool.submit_tx(txgen.next_tx())?;
        }
        let parent_ts = chain.tip().header.timestamp;
        let outcome = run_round(&mut agents, chain, &mempool, &ctx)?;
        on_block(&outcome)?;
        let h = &outcome.sealed_block.header;
        log.push(RoundLog {
            round,
            height: h.height,
            winner: outcome.winner.clone(),
            winning_nonce: h.nonce,
            winning_accuracy: h.accuracy_claim,
            dimension: h.difficulty.dimension,
            threshold: h.difficulty.accuracy_threshold,
            num_levels: h.difficulty.num_levels,
            repeats: outcome.repeats,
            rejected: outcome.rejected.len() as u32,
            block_interval_ms: h.timestamp - parent_ts,
            wall_ms: outcome.wall_ms,
            miners: outcome
                .all_results
                .iter()
                .map(|s| MinerRoundStats {
                    miner_id: s.miner_id.clone(),
                    best: s.result.accuracy,
                    trials: s.result.trials_used,
                    nonce_time_wall: s.result.nonce_time,
                })
                .collect(),
        });
        outcomes.push(outcome);
    }
    Ok(SimReport {
        chain: chain.clone(),
        log,
        outcomes,
    })
}

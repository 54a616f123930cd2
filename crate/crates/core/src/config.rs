//! Run configuration, read from a TOML file.
//!
//! ```toml
//! threads = 4
//!
//! [data]              # exactly one of: train+test, path, synthetic
//! path = "cardio.csv"
//! header = true
//! train_fraction = "7/10"
//! split_seed = 1
//!
//! [chain]
//! dimension = 3000    # initial rung; must be on the ladder
//! threshold = "1/2"
//! num_levels = 10
//! window = 10
//! t_low_ms = 250
//! t_high_ms = 1000
//!
//! [simulation]
//! rounds = 5
//! clock = { kind = "work", ops_per_ms = 100000 }
//!
//! [[agents]]
//! id = "alice"
//! budget = 4
//! strategy = { kind = "random", seed = 1 }
//!
//! [output]
//! chain = "chain.jsonl"
//! log = "rounds.tsv"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainParams, Difficulty, DEFAULT_LADDER};
use crate::consensus::{AgentSpec, Behavior, ClockMode, SimConfig};
use crate::dataset::{generate_synthetic, load_csv, split, CsvOptions, DatasetError, SyntheticSpec, TaskData};
use crate::miner::NonceStrategy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

mod ratio_str {
    use num_rational::Ratio;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Ratio<u32>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio<u32>, D::Error> {
        crate::dataset::parse_ratio(&String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub header: bool,
    #[serde(with = "ratio_str", default = "default_fraction")]
    pub train_fraction: Ratio<u32>,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_fraction() -> Ratio<u32> {
    Ratio::new(1, 2)
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            path: None,
            synthetic: Some(SyntheticSpec::default()),
            header: false,
            train_fraction: default_fraction(),
            split_seed: 0,
        }
    }
}

impl DataConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        let pair = self.train.is_some() || self.test.is_some();
        let chosen = [pair, self.path.is_some(), self.synthetic.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if chosen != 1 {
            return Err(ConfigError::Invalid(
                "[data] needs exactly one of: train + test, path, synthetic".into(),
            ));
        }
        if pair && (self.train.is_none() || self.test.is_none()) {
            return Err(ConfigError::Invalid("[data] train and test must be given together".into()));
        }
        Ok(())
    }

    /// Loads or generates the task. Single datasets go through the stratified split.
    pub fn load(&self, base: &Path) -> Result<TaskData, ConfigError> {
        self.validate()?;
        let opts = CsvOptions {
            has_header: self.header,
        };
        let resolve = |p: &Path| if p.is_absolute() { p.to_owned() } else { base.join(p) };
        if let (Some(train), Some(test)) = (&self.train, &self.test) {
            let train = load_csv(&resolve(train), opts)?;
            let test = load_csv(&resolve(test), opts)?;
            return Ok(TaskData::new(train, test)?);
        }
        let full = match (&self.path, &self.synthetic) {
            (Some(path), _) => load_csv(&resolve(path), opts)?,
            (None, Some(spec)) => generate_synthetic(spec)?,
            (None, None) => unreachable!("validated above"),
        };
        let (train, test) = split(&full, self.train_fraction, self.split_seed)?;
        Ok(TaskData::new(train, test)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub ladder: Vec<u32>,
    pub dimension: u32,
    #[serde(with = "ratio_str")]
    pub threshold: Ratio<u32>,
    pub num_levels: u32,
    pub window: usize,
    pub t_low_ms: u64,
    pub t_high_ms: u64,
    #[serde(with = "ratio_str")]
    pub margin: Ratio<u32>,
    #[serde(with = "ratio_str")]
    pub decay_step: Ratio<u32>,
    pub reward: u64,
    pub max_block_txs: usize,
    pub genesis_timestamp: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            ladder: DEFAULT_LADDER.to_vec(),
            dimension: DEFAULT_LADDER[0],
            threshold: Ratio::new(1, 2),
            num_levels: 10,
            window: 10,
            t_low_ms: 250,
            t_high_ms: 1000,
            margin: Ratio::new(2, 100),
            decay_step: Ratio::new(1, 100),
            reward: 50,
            max_block_txs: 64,
            genesis_timestamp: 1_700_000_000_000,
        }
    }
}

impl ChainConfig {
    pub fn params(&self, task: &TaskData) -> ChainParams {
        ChainParams {
            dataset_hash: task.hash(),
            ladder: self.ladder.clone(),
            initial: Difficulty {
                dimension: self.dimension,
                accuracy_threshold: self.threshold,
                num_levels: self.num_levels,
            },
            window: self.window,
            t_low_ms: self.t_low_ms,
            t_high_ms: self.t_high_ms,
            margin: self.margin,
            decay_step: self.decay_step,
            reward: self.reward,
            max_block_txs: self.max_block_txs,
            genesis_timestamp: self.genesis_timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub rounds: u32,
    pub tx_seed: u64,
    pub txs_per_round: u32,
    pub clock: ClockMode,
    pub max_floor_repeats: u32,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            tx_seed: 0,
            txs_per_round: 8,
            clock: ClockMode::Work { ops_per_ms: 100_000 },
            max_floor_repeats: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub chain: PathBuf,
    pub log: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            chain: "chain.jsonl".into(),
            log: "rounds.tsv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Worker threads for nonce trials. Never changes results.
    pub threads: usize,
    pub data: DataConfig,
    pub chain: ChainConfig,
    pub simulation: SimulationConfig,
    pub agents: Vec<AgentSpec>,
    pub output: OutputConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let agent = |id: &str, seed: u64| AgentSpec {
            id: id.into(),
            budget: 4,
            strategy: NonceStrategy::Random { seed },
            behavior: Behavior::Honest,
        };
        Self {
            threads: 1,
            data: DataConfig::default(),
            chain: ChainConfig::default(),
            simulation: SimulationConfig::default(),
            agents: vec![agent("alice", 1), agent("bob", 2), agent("carol", 3)],
            output: OutputConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        cfg.base_dir = path.parent().map(Path::to_owned).unwrap_or_else(|| PathBuf::from("."));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.data.validate()?;
        let task_free = ChainParams {
            dataset_hash: Default::default(),
            ..self.chain.params_shape()
        };
        task_free
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("[chain] {e}")))?;
        self.sim_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_task(&self) -> Result<Arc<TaskData>, ConfigError> {
        Ok(Arc::new(self.data.load(&self.base_dir)?))
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            agents: self.agents.clone(),
            rounds: self.simulation.rounds,
            tx_seed: self.simulation.tx_seed,
            txs_per_round: self.simulation.txs_per_round,
            clock: self.simulation.clock,
            max_floor_repeats: self.simulation.max_floor_repeats,
        }
    }
}

impl ChainConfig {
    fn params_shape(&self) -> ChainParams {
        ChainParams {
            dataset_hash: Default::default(),
            ladder: self.ladder.clone(),
            initial: Difficulty {
                dimension: self.dimension,
                accuracy_threshold: self.threshold,
                num_levels: self.num_levels,
            },
            window: self.window,
            t_low_ms: self.t_low_ms,
            t_high_ms: self.t_high_ms,
            margin: self.margin,
            decay_step: self.decay_step,
            reward: self.reward,
            max_block_txs: self.max_block_txs,
            genesis_timestamp: self.genesis_timestamp,
        }
    }
}

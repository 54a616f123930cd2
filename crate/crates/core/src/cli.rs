//! Command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Ratio;

use hdcoin::chain::{append_block_record, load_chain, save_chain, Block, Chain, ChainError, Difficulty, Validator};
use hdcoin::config::{ConfigError, RunConfig};
use hdcoin::consensus::{
    parse_round_log, run_rounds, verify_claim, write_round_log, RoundLog, SimError, Verdict,
};
use hdcoin::dataset::{
    dataset_hash, generate_synthetic, load_csv, parse_ratio, save_csv, split, CsvOptions, DatasetError, SyntheticSpec,
    TaskData,
};
use hdcoin::hdc::{ExactAccuracy, HdcError};
use hdcoin::miner::{measure_nonce_time, Miner, MiningResult, MiningTask, NonceStrategy};

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_REJECTED: u8 = 4;

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::new(EXIT_OTHER, e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Io { .. } => EXIT_OTHER,
            ConfigError::Dataset(DatasetError::Io { .. }) => EXIT_OTHER,
            _ => EXIT_CONFIG,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        let code = if matches!(e, DatasetError::Io { .. }) { EXIT_OTHER } else { EXIT_CONFIG };
        Failure::new(code, e.to_string())
    }
}

impl From<HdcError> for Failure {
    fn from(e: HdcError) -> Self {
        Failure::new(EXIT_CONFIG, e.to_string())
    }
}

impl From<ChainError> for Failure {
    fn from(e: ChainError) -> Self {
        let code = match e {
            ChainError::Params(_) => EXIT_CONFIG,
            ChainError::Violation(_) | ChainError::Parse { .. } => EXIT_INVALID,
            _ => EXIT_OTHER,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Hdc(e) => e.into(),
            SimError::Chain(e) => e.into(),
            SimError::Config(m) => Failure::new(EXIT_CONFIG, m),
            e @ SimError::SealedInvalid(_) => Failure::new(EXIT_INVALID, e.to_string()),
            e @ SimError::Stalled { .. } => Failure::new(EXIT_OTHER, e.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

#[derive(Parser)]
#[command(name = "hdcoin", version, about = "Proof-of-useful-work chain mined by training HDC classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset utilities.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Print the default run configuration as TOML.
    Config,
    /// Search a nonce window for the most accurate classifier.
    Mine(MineArgs),
    /// Recompute one nonce and check a claimed accuracy.
    Verify(VerifyArgs),
    /// Run a multi-miner simulation and write the chain and round log.
    Simulate(SimulateArgs),
    /// Validate a stored chain from genesis.
    VerifyChain(VerifyChainArgs),
    /// Nonce time per ladder dimension and best accuracy against budget.
    Benchmark(BenchmarkArgs),
    /// Summarize a round log.
    Report(ReportArgs),
    /// Print the blocks of a stored chain.
    Inspect(InspectArgs),
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Print the SHA-256 digest of a CSV dataset.
    Hash {
        path: PathBuf,
        #[arg(long)]
        header: bool,
    },
    /// Stratified train/test split.
    Split {
        path: PathBuf,
        #[arg(long, default_value = "1/2", value_parser = parse_ratio)]
        fraction: Ratio<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        header: bool,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
    /// Write seeded Gaussian blobs as CSV.
    GenSynthetic {
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 16)]
        features: usize,
        #[arg(long, default_value_t = 50)]
        samples_per_class: usize,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TaskArgs {
    /// Run configuration (TOML). Defaults to the built-in synthetic setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; never changes any result.
    #[arg(long)]
    threads: Option<usize>,
}

impl TaskArgs {
    fn load(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct DifficultyArgs {
    /// Hypervector dimension (defaults to the configured initial rung).
    #[arg(long)]
    dimension: Option<u32>,
    /// Quantization levels.
    #[arg(long)]
    levels: Option<u32>,
    /// Accuracy threshold, as "a/b" or a decimal.
    #[arg(long, value_parser = parse_ratio)]
    threshold: Option<Ratio<u32>>,
}

impl DifficultyArgs {
    fn resolve(&self, cfg: &RunConfig) -> Difficulty {
        Difficulty {
            dimension: self.dimension.unwrap_or(cfg.chain.dimension),
            accuracy_threshold: self.threshold.unwrap_or(cfg.chain.threshold),
            num_levels: self.levels.unwrap_or(cfg.chain.num_levels),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyKind {
    Sequential,
    Random,
}

#[derive(Args)]
struct StrategyArgs {
    #[arg(long, value_enum, default_value = "sequential")]
    strategy: StrategyKind,
    /// First nonce (sequential) or stream seed (random).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl StrategyArgs {
    fn resolve(&self) -> Result<NonceStrategy, Failure> {
        Ok(match self.strategy {
            StrategyKind::Sequential => NonceStrategy::Sequential {
                start: u32::try_from(self.seed)
                    .map_err(|_| Failure::new(EXIT_CONFIG, "sequential start must fit in 32 bits"))?,
            },
            StrategyKind::Random => NonceStrategy::Random { seed: self.seed },
        })
    }
}

#[derive(Args)]
struct MineArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    difficulty: DifficultyArgs,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Nonces to try.
    #[arg(long, default_value_t = 8)]
    budget: u32,
    /// Print every trial.
    #[arg(long)]
    trials: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    difficulty: DifficultyArgs,
    #[arg(long)]
    nonce: u32,
    /// Claimed accuracy as "correct/total".
    #[arg(long, value_parser = parse_claim)]
    claim: ExactAccuracy,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long)]
    rounds: Option<u32>,
    /// Chain output (JSON lines). Overrides the config.
    #[arg(long)]
    chain: Option<PathBuf>,
    /// Round log output (TSV). Overrides the config.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Extend an existing chain file instead of starting from genesis.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct VerifyChainArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Chain file; defaults to the configured output.
    #[arg(long)]
    chain: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Trials timed per dimension (median reported).
    #[arg(long, default_value_t = 3)]
    samples: usize,
    /// Budgets for the accuracy curve.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    budgets: Vec<usize>,
    /// Also write both tables as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Round log written by `simulate`.
    log: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    chain: PathBuf,
    /// Show a single height.
    #[arg(long)]
    height: Option<u64>,
}

fn parse_claim(s: &str) -> Result<ExactAccuracy, String> {
    let (c, t) = s.split_once('/').ok_or("expected correct/total")?;
    let correct: u32 = c.trim().parse().map_err(|e| format!("bad count: {e}"))?;
    let total: u32 = t.trim().parse().map_err(|e| format!("bad total: {e}"))?;
    if total == 0 || correct > total {
        return Err("need 0 <= correct <= total and total > 0".into());
    }
    Ok(ExactAccuracy::new(correct, total))
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Dataset(d) => dataset_cmd(d),
        Command::Config => {
            print!("{}", RunConfig::default().to_toml());
            Ok(())
        }
        Command::Mine(a) => mine_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::VerifyChain(a) => verify_chain_cmd(a),
        Command::Benchmark(a) => benchmark_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::Inspect(a) => inspect_cmd(a),
    }
}

fn dataset_cmd(cmd: DatasetCmd) -> CliResult {
    match cmd {
        DatasetCmd::Hash { path, header } => {
            let ds = load_csv(&path, CsvOptions { has_header: header })?;
            println!("{}", dataset_hash(&ds));
        }
        DatasetCmd::Split {
            path,
            fraction,
            seed,
            header,
            train_out,
            test_out,
        } => {
            let opts = CsvOptions { has_header: header };
            let ds = load_csv(&path, opts)?;
            let (train, test) = split(&ds, fraction, seed)?;
            save_csv(&train, &train_out, opts)?;
            save_csv(&test, &test_out, opts)?;
            let task = TaskData::new(train, test)?;
            println!("train {} rows -> {}", task.train.len(), train_out.display());
            println!("test  {} rows -> {}", task.test.len(), test_out.display());
            println!("task  {}", task.hash());
        }
        DatasetCmd::GenSynthetic {
            classes,
            features,
            samples_per_class,
            separation,
            noise,
            seed,
            out,
        } => {
            let spec = SyntheticSpec {
                classes,
                features,
                samples_per_class,
                separation,
                noise,
                seed,
            };
            let ds = generate_synthetic(&spec)?;
            save_csv(&ds, &out, CsvOptions { has_header: false })?;
            println!("{} rows x {} features -> {}", ds.len(), ds.num_features(), out.display());
            println!("hash {}", dataset_hash(&ds));
        }
    }
    Ok(())
}

fn prepare(cfg: &RunConfig) -> Result<(Arc<TaskData>, Validator), Failure> {
    let task = cfg.load_task()?;
    let validator = Validator::new(cfg.chain.params(&task), Arc::clone(&task))?;
    Ok((task, validator))
}

fn mine_cmd(a: MineArgs) -> CliResult {
    let cfg = a.task.load()?;
    let difficulty = a.difficulty.resolve(&cfg);
    let (task, validator) = prepare(&cfg)?;
    let prepared = validator.prepared(difficulty.num_levels)?;
    let mining = MiningTask::new(task.hash(), difficulty, a.budget, a.strategy.resolve()?);
    let outcome = Miner::new(cfg.threads).mine(&mining, &prepared)?;
    let mut out = io::stdout().lock();
    if a.trials {
        for (i, t) in outcome.trials.iter().enumerate() {
            writeln!(out, "trial {:>4}  nonce {:>10}  {}", i + 1, t.nonce, t.accuracy)?;
        }
    }
    print_result(&mut out, &outcome.result, &difficulty)?;
    Ok(())
}

fn print_result(out: &mut impl Write, r: &MiningResult, d: &Difficulty) -> io::Result<()> {
    writeln!(out, "dimension   {}", d.dimension)?;
    writeln!(out, "levels      {}", d.num_levels)?;
    writeln!(out, "best nonce  {}", r.nonce)?;
    writeln!(out, "accuracy    {}", r.accuracy)?;
    writeln!(out, "trials      {}", r.trials_used)?;
    writeln!(out, "found at    {}", r.found_at)?;
    writeln!(out, "nonce time  {:.3} ms", r.nonce_time * 1000.0)?;
    let meets = r.accuracy.meets(d.accuracy_threshold);
    writeln!(
        out,
        "threshold   {}/{} ({})",
        d.accuracy_threshold.numer(),
        d.accuracy_threshold.denom(),
        if meets { "met" } else { "not met" }
    )
}

fn verify_cmd(a: VerifyArgs) -> CliResult {
    let cfg = a.task.load()?;
    let difficulty = a.difficulty.resolve(&cfg);
    let (_, validator) = prepare(&cfg)?;
    let prepared = validator.prepared(difficulty.num_levels)?;
    let claim = MiningResult {
        nonce: a.nonce,
        accuracy: a.claim,
        nonce_time: 0.0,
        trials_used: 1,
        found_at: 1,
    };
    let actual = validator.recompute(a.nonce, &difficulty)?;
    println!("recomputed  {actual}");
    match verify_claim(&claim, &difficulty, &prepared)? {
        Verdict::Accept => {
            println!("accept");
            Ok(())
        }
        Verdict::Reject(reason) => Err(Failure::new(EXIT_REJECTED, format!("reject: {reason}"))),
    }
}

fn simulate_cmd(a: SimulateArgs) -> CliResult {
    let mut cfg = a.task.load()?;
    if let Some(r) = a.rounds {
        cfg.simulation.rounds = r;
    }
    let chain_path = a.chain.unwrap_or_else(|| cfg.resolve(&cfg.output.chain));
    let log_path = a.log.unwrap_or_else(|| cfg.resolve(&cfg.output.log));
    let sim = cfg.sim_config();
    sim.validate()?;
    let (_, validator) = prepare(&cfg)?;

    let mut chain = if a.resume && chain_path.exists() {
        Chain::from_blocks(load_chain(&chain_path)?, &validator).map_err(ChainError::from)?
    } else {
        let chain = Chain::new(&validator);
        save_chain(chain.blocks(), &chain_path)?;
        chain
    };
    let report = run_rounds(&sim, &validator, cfg.threads, &mut chain, |outcome| {
        append_block_record(&chain_path, &outcome.sealed_block)?;
        let h = &outcome.sealed_block.header;
        println!(
            "height {:>4}  winner {:<10} nonce {:>10}  {}  d={} thr={}/{}{}",
            h.height,
            outcome.winner,
            h.nonce,
            h.accuracy_claim,
            h.difficulty.dimension,
            h.difficulty.accuracy_threshold.numer(),
            h.difficulty.accuracy_threshold.denom(),
            if outcome.rejected.is_empty() {
                String::new()
            } else {
                format!("  rejected {}", outcome.rejected.len())
            }
        );
        Ok(())
    })?;

    let append = a.resume && log_path.exists();
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(append)
        .write(true)
        .truncate(!append)
        .open(&log_path)
        .map_err(|e| Failure::new(EXIT_OTHER, format!("{}: {e}", log_path.display())))?;
    if append {
        for r in &report.log {
            writeln!(file, "{}", r.to_tsv())?;
        }
    } else {
        write_round_log(&report.log, &mut file)?;
    }

    let stored = load_chain(&chain_path)?;
    validator
        .validate_chain(&stored)
        .map_err(|v| Failure::new(EXIT_INVALID, v.to_string()))?;
    println!("chain valid: {} blocks -> {}", stored.len(), chain_path.display());
    println!("round log  -> {}", log_path.display());
    Ok(())
}

fn verify_chain_cmd(a: VerifyChainArgs) -> CliResult {
    let cfg = a.task.load()?;
    let path = a.chain.unwrap_or_else(|| cfg.resolve(&cfg.output.chain));
    let (_, validator) = prepare(&cfg)?;
    let blocks = load_chain(&path)?;
    match validator.validate_chain(&blocks) {
        Ok(()) => {
            println!("valid: {} blocks, tip {}", blocks.len(), hex::encode(blocks.last().map_or([0; 32], |b| b.hash)));
            Ok(())
        }
        Err(v) => Err(Failure::new(EXIT_INVALID, v.to_string())),
    }
}

fn benchmark_cmd(a: BenchmarkArgs) -> CliResult {
    let cfg = a.task.load()?;
    let (task, validator) = prepare(&cfg)?;
    let strategy = a.strategy.resolve()?;
    let base = Difficulty {
        dimension: cfg.chain.dimension,
        accuracy_threshold: cfg.chain.threshold,
        num_levels: cfg.chain.num_levels,
    };
    let mut csv = String::from("section,key,value\n");
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "task {} ({} train / {} test, {} features, {} classes)",
        task.hash(),
        task.train.len(),
        task.test.len(),
        task.train.num_features(),
        task.train.num_classes()
    )?;
    writeln!(out)?;
    writeln!(out, "{:>9}  {:>14}", "dimension", "nonce time ms")?;
    for &dimension in &validator.params().ladder {
        let d = Difficulty { dimension, ..base };
        let mining = MiningTask::new(task.hash(), d, a.samples as u32, strategy);
        let secs = measure_nonce_time(&mining, &task.train, &task.test, a.samples)?;
        writeln!(out, "{:>9}  {:>14.3}", dimension, secs * 1000.0)?;
        csv.push_str(&format!("nonce_time_ms,{dimension},{:.6}\n", secs * 1000.0));
    }

    let max_budget = a.budgets.iter().copied().max().unwrap_or(1).max(1);
    let prepared = validator.prepared(base.num_levels)?;
    let mining = MiningTask::new(task.hash(), base, max_budget as u32, strategy);
    let outcome = Miner::new(cfg.threads).mine(&mining, &prepared)?;
    writeln!(out)?;
    writeln!(out, "{:>6}  {:>20}   (d={})", "budget", "best accuracy", base.dimension)?;
    for (b, acc) in outcome.best_curve(&a.budgets) {
        writeln!(out, "{:>6}  {:>20}", b, acc.to_string())?;
        csv.push_str(&format!("best_accuracy,{b},{}/{}\n", acc.correct, acc.total));
    }
    if let Some(path) = a.csv {
        fs::write(&path, csv).map_err(|e| Failure::new(EXIT_OTHER, format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn report_cmd(a: ReportArgs) -> CliResult {
    let text = read(&a.log)?;
    let log = parse_round_log(&text).map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", a.log.display())))?;
    print!("{}", summarize_log(&log));
    Ok(())
}

fn summarize_log(log: &[RoundLog]) -> String {
    use std::collections::BTreeMap;
    use std::fmt::Write as _;
    let mut s = String::new();
    let Some(last) = log.last() else {
        return "empty log\n".into();
    };
    let mut wins: BTreeMap<&str, u32> = BTreeMap::new();
    for r in log {
        *wins.entry(r.winner.as_str()).or_default() += 1;
    }
    let mut intervals: Vec<u64> = log.iter().map(|r| r.block_interval_ms).collect();
    intervals.sort_unstable();
    let mean = intervals.iter().sum::<u64>() as f64 / intervals.len() as f64;
    let _ = writeln!(s, "rounds            {}", log.len());
    let _ = writeln!(s, "final height      {}", last.height);
    let _ = writeln!(s, "interval ms       mean {:.1}, median {}", mean, intervals[(intervals.len() - 1) / 2]);
    let _ = writeln!(s, "repeats           {}", log.iter().map(|r| u64::from(r.repeats)).sum::<u64>());
    let _ = writeln!(s, "rejected claims   {}", log.iter().map(|r| u64::from(r.rejected)).sum::<u64>());
    let dims: Vec<String> = log.iter().map(|r| r.dimension.to_string()).collect();
    let _ = writeln!(s, "dimensions        {}", dims.join(" "));
    let thr: Vec<String> = log.iter().map(|r| format!("{}/{}", r.threshold.numer(), r.threshold.denom())).collect();
    let _ = writeln!(s, "thresholds        {}", thr.join(" "));
    let _ = writeln!(s, "wins");
    for (id, n) in wins {
        let _ = writeln!(s, "  {id:<12} {n}");
    }
    s
}

fn inspect_cmd(a: InspectArgs) -> CliResult {
    let blocks = load_chain(&a.chain)?;
    let mut out = io::stdout().lock();
    let shown: Vec<&Block> = match a.height {
        Some(h) => blocks.iter().filter(|b| b.height() == h).collect(),
        None => blocks.iter().collect(),
    };
    if shown.is_empty() {
        return Err(Failure::new(EXIT_OTHER, "no such height"));
    }
    for b in shown {
        let h = &b.header;
        writeln!(
            out,
            "{:>5}  {}  nonce {:>10}  {:<18} d={:<5} thr={}/{} L={}  ts {}  txs {}",
            h.height,
            &hex::encode(b.hash)[..16],
            h.nonce,
            h.accuracy_claim.to_string(),
            h.difficulty.dimension,
            h.difficulty.accuracy_threshold.numer(),
            h.difficulty.accuracy_threshold.denom(),
            h.difficulty.num_levels,
            h.timestamp,
            b.transactions.len()
        )?;
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_OTHER, format!("{}: {e}", path.display())))
}


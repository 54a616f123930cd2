//! Dataset ingestion, canonical hashing, and deterministic stratified splits.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("dataset is empty")]
    Empty,
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("class {class} has {count} sample(s); stratified split needs at least 2")]
    ClassTooSmall { class: u32, count: usize },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(Ratio<u32>),
}

/// An in-memory labelled dataset with dense labels `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Vec<f64>,
    num_features: usize,
    labels: Vec<u32>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u32>,
        num_classes: usize,
    ) -> Result<Self, DatasetError> {
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        if rows.len() != labels.len() {
            return Err(DatasetError::Invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let num_features = rows[0].len();
        if num_features == 0 {
            return Err(DatasetError::Invalid("rows have no features".into()));
        }
        let mut features = Vec::with_capacity(rows.len() * num_features);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != num_features {
                return Err(DatasetError::Invalid(format!(
                    "row {i} has {} features, expected {num_features}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::Invalid(format!("row {i} has a non-finite feature")));
            }
            features.extend(row);
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(DatasetError::Invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            name: name.into(),
            features,
            num_features,
            labels,
            num_classes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.features.chunks_exact(self.num_features)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Accuracy of always predicting the most frequent class.
    pub fn majority_baseline(&self) -> Ratio<u32> {
        let top = self.class_counts().into_iter().max().unwrap_or(0);
        Ratio::new(top as u32, self.len().max(1) as u32)
    }

    fn subset(&self, name: String, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.num_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            name,
            features,
            num_features: self.num_features,
            labels,
            num_classes: self.num_classes,
        }
    }

    /// Canonical bytes fed to SHA-256: name, NUL, N/m/k as u64 BE, features as
    /// IEEE-754 bit patterns (u64 BE, row-major), labels as u32 BE.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.name.len() + 25 + self.features.len() * 8 + self.labels.len() * 4);
        out.extend_from_slice(self.name.as_bytes());
        out.push(0);
        out.extend_from_slice(&(self.len() as u64).to_be_bytes());
        out.extend_from_slice(&(self.num_features as u64).to_be_bytes());
        out.extend_from_slice(&(self.num_classes as u64).to_be_bytes());
        for v in &self.features {
            out.extend_from_slice(&v.to_bits().to_be_bytes());
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_be_bytes());
        }
        out
    }
}

/// SHA-256 digest identifying a dataset (or a train/test task).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DatasetHash(pub [u8; 32]);

impl fmt::Display for DatasetHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for DatasetHash {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s.trim(), &mut out)?;
        Ok(Self(out))
    }
}

pub fn dataset_hash(ds: &Dataset) -> DatasetHash {
    DatasetHash(Sha256::digest(ds.canonical_bytes()).into())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    pub has_header: bool,
}

fn parse_err(row: usize, message: impl Into<String>) -> DatasetError {
    DatasetError::Parse {
        row,
        message: message.into(),
    }
}

/// Reads `features..., label` rows. Labels are remapped to `0..k` in ascending
/// order of their original integer values. Row numbers in errors are 1-based
/// file lines.
pub fn load_csv(path: &Path, opts: CsvOptions) -> Result<Dataset, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_owned(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(row, e.to_string())
        })?;
        let row_no = record.position().map(|p| p.line() as usize).unwrap_or(rows.len() + 1);
        if record.len() < 2 {
            return Err(parse_err(row_no, "need at least one feature and a label"));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(
                    row_no,
                    format!("expected {w} columns, found {}", record.len()),
                ))
            }
            _ => {}
        }
        let (label_field, feature_fields) = record
            .iter()
            .collect::<Vec<_>>()
            .split_last()
            .map(|(l, f)| (*l, f.to_vec()))
            .expect("record has at least two fields");
        let mut row = Vec::with_capacity(feature_fields.len());
        for (col, field) in feature_fields.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(row_no, format!("column {}: '{field}' is not a number", col + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(row_no, format!("column {}: non-finite value", col + 1)));
            }
            row.push(v);
        }
        let label = parse_label(label_field)
            .ok_or_else(|| parse_err(row_no, format!("label '{label_field}' is not an integer")))?;
        rows.push(row);
        raw_labels.push(label);
    }
    if rows.is_empty() {
        return Err(DatasetError::Empty);
    }

    let dense: BTreeMap<i64, u32> = {
        let mut distinct: Vec<i64> = raw_labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.into_iter().zip(0..).collect()
    };
    let labels = raw_labels.iter().map(|l| dense[l]).collect();
    Dataset::new(name, rows, labels, dense.len())
}

/// Integer labels; spreadsheet exports such as `2.0` are accepted too.
fn parse_label(field: &str) -> Option<i64> {
    if let Ok(v) = field.parse::<i64>() {
        return Some(v);
    }
    let v: f64 = field.parse().ok()?;
    (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

pub fn save_csv(ds: &Dataset, path: &Path, opts: CsvOptions) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.to_owned(),
        source,
    };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io)?);
    write_csv(ds, &mut out, opts).map_err(io)?;
    out.flush().map_err(io)
}

pub fn write_csv(ds: &Dataset, out: &mut impl Write, opts: CsvOptions) -> std::io::Result<()> {
    if opts.has_header {
        let mut cols: Vec<String> = (0..ds.num_features()).map(|j| format!("f{j}")).collect();
        cols.push("label".into());
        writeln!(out, "{}", cols.join(","))?;
    }
    for (row, label) in ds.rows().zip(ds.labels()) {
        for v in row {
            // Display for f64 is the shortest representation that round-trips.
            write!(out, "{v},")?;
        }
        writeln!(out, "{label}")?;
    }
    Ok(())
}

/// Deterministic stratified split.
///
/// Classes are visited in ascending order; each class's sample indices are
/// shuffled (Fisher-Yates driven by one shared SplitMix64 stream seeded with
/// `seed`) and the first `ceil(fraction * count)` go to training, capped at
/// `count - 1` so every class keeps a test sample. Both outputs keep the
/// original row order.
pub fn split(ds: &Dataset, fraction: Ratio<u32>, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
    if *fraction.numer() == 0 || fraction >= Ratio::from_integer(1) {
        return Err(DatasetError::BadFraction(fraction));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, &l) in ds.labels().iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut rng = SplitMix64::new(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(DatasetError::ClassTooSmall {
                class: class as u32,
                count: members.len(),
            });
        }
        for i in (1..members.len()).rev() {
            let j = rng.next_below(i as u64 + 1) as usize;
            members.swap(i, j);
        }
        let n = members.len() as u64;
        let want = (n * u64::from(*fraction.numer())).div_ceil(u64::from(*fraction.denom()));
        let take = want.min(n - 1) as usize;
        train_idx.extend_from_slice(&members[..take]);
        test_idx.extend_from_slice(&members[take..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((
        ds.subset(format!("{}-train", ds.name()), &train_idx),
        ds.subset(format!("{}-test", ds.name()), &test_idx),
    ))
}

/// Parameters of the Gaussian-blob generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub features: usize,
    pub samples_per_class: usize,
    /// Class centres are drawn uniformly from `[-separation, separation]` per feature.
    pub separation: f64,
    /// Standard deviation of the per-sample Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            features: 16,
            samples_per_class: 50,
            separation: 1.0,
            noise: 1.0,
            seed: 7,
        }
    }
}

/// Seeded Gaussian blobs, rows interleaved by class, values rounded to 1e-4.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset, DatasetError> {
    if spec.classes == 0 || spec.features == 0 || spec.samples_per_class == 0 {
        return Err(DatasetError::Invalid(
            "classes, features and samples_per_class must be positive".into(),
        ));
    }
    if !(spec.separation.is_finite() && spec.separation >= 0.0) {
        return Err(DatasetError::Invalid("separation must be finite and non-negative".into()));
    }
    let noise = Normal::new(0.0, spec.noise)
        .map_err(|e| DatasetError::Invalid(format!("noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            (0..spec.features)
                .map(|_| {
                    if spec.separation == 0.0 {
                        0.0
                    } else {
                        rng.random_range(-spec.separation..=spec.separation)
                    }
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(spec.classes * spec.samples_per_class);
    let mut labels = Vec::with_capacity(rows.capacity());
    for _ in 0..spec.samples_per_class {
        for (c, center) in centers.iter().enumerate() {
            let row = center
                .iter()
                .map(|&mu| ((mu + noise.sample(&mut rng)) * 1e4).round() / 1e4)
                .collect();
            rows.push(row);
            labels.push(c as u32);
        }
    }
    Dataset::new(format!("synthetic-{}", spec.seed), rows, labels, spec.classes)
}

/// The train/inference pair every miner works on, identified by one digest.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub train: Dataset,
    pub test: Dataset,
    hash: DatasetHash,
}

impl TaskData {
    pub fn new(train: Dataset, test: Dataset) -> Result<Self, DatasetError> {
        if train.num_features() != test.num_features() {
            return Err(DatasetError::Invalid(format!(
                "train has {} features, test has {}",
                train.num_features(),
                test.num_features()
            )));
        }
        if train.num_classes() != test.num_classes() {
            return Err(DatasetError::Invalid(format!(
                "train has {} classes, test has {}",
                train.num_classes(),
                test.num_classes()
            )));
        }
        let mut hasher = Sha256::new();
        hasher.update(dataset_hash(&train).0);
        hasher.update(dataset_hash(&test).0);
        let hash = DatasetHash(hasher.finalize().into());
        Ok(Self { train, test, hash })
    }

    /// SHA-256 over the train digest followed by the test digest.
    pub fn hash(&self) -> DatasetHash {
        self.hash
    }

    pub fn majority_baseline(&self) -> Ratio<u32> {
        self.test.majority_baseline()
    }
}

/// Parses `"a/b"`, a decimal such as `"0.85"`, or an integer into an exact ratio.
pub fn parse_ratio(s: &str) -> Result<Ratio<u32>, String> {
    let s = s.trim();
    let bad = || format!("'{s}' is not a fraction or decimal");
    if let Some((n, d)) = s.split_once('/') {
        let n: u32 = n.trim().parse().map_err(|_| bad())?;
        let d: u32 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(format!("'{s}' has a zero denominator"));
        }
        return Ok(Ratio::new(n, d));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 9 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let int: u32 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let den = 10u32.pow(frac.len() as u32);
    let frac_val: u32 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let numer = int
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac_val))
        .ok_or_else(bad)?;
    Ok(Ratio::new(numer, den))
}

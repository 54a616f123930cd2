use super::{HdcError, IntHv, ItemMemory};

/// Parameters of the record-based encoder: dimension, level count, and the
/// per-feature `(min, max)` range used for quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingConfig {
    dim: usize,
    num_levels: usize,
    feature_bounds: Vec<(f64, f64)>,
}

impl EncodingConfig {
    pub fn new(
        dim: usize,
        num_levels: usize,
        feature_bounds: Vec<(f64, f64)>,
    ) -> Result<Self, HdcError> {
        if dim == 0 {
            return Err(HdcError::Config("dimension must be at least 1".into()));
        }
        if num_levels < 2 {
            return Err(HdcError::Config(format!("need at least 2 levels, got {num_levels}")));
        }
        for (j, &(lo, hi)) in feature_bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(HdcError::Config(format!(
                    "feature {j} has invalid bounds ({lo}, {hi})"
                )));
            }
        }
        Ok(Self {
            dim,
            num_levels,
            feature_bounds,
        })
    }

    /// Bounds are the per-feature min and max over `rows`.
    pub fn from_rows<'a>(
        dim: usize,
        num_levels: usize,
        rows: impl IntoIterator<Item = &'a [f64]>,
    ) -> Result<Self, HdcError> {
        let mut bounds: Vec<(f64, f64)> = Vec::new();
        for row in rows {
            if bounds.is_empty() {
                bounds = row.iter().map(|&v| (v, v)).collect();
                continue;
            }
            if row.len() != bounds.len() {
                return Err(HdcError::FeatureCount {
                    expected: bounds.len(),
                    actual: row.len(),
                });
            }
            for (b, &v) in bounds.iter_mut().zip(row) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        Self::new(dim, num_levels, bounds)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn feature_bounds(&self) -> &[(f64, f64)] {
        &self.feature_bounds
    }

    pub fn num_features(&self) -> usize {
        self.feature_bounds.len()
    }

    /// Quantizes a whole feature row into level indices.
    pub fn levels_of(&self, features: &[f64]) -> Result<Vec<usize>, HdcError> {
        if features.len() != self.feature_bounds.len() {
            return Err(HdcError::FeatureCount {
                expected: self.feature_bounds.len(),
                actual: features.len(),
            });
        }
        Ok(features
            .iter()
            .zip(&self.feature_bounds)
            .map(|(&v, &b)| quantize(v, b, self.num_levels))
            .collect())
    }
}

/// Maps a raw feature value to a level index in `0..levels`.
///
/// `floor((value - min) / (max - min) * levels)` clamped to the valid range;
/// a degenerate range maps everything to level 0. NaN lands on level 0.
pub fn quantize(value: f64, bounds: (f64, f64), levels: usize) -> usize {
    let (lo, hi) = bounds;
    if hi == lo {
        return 0;
    }
    let scaled = ((value - lo) / (hi - lo) * levels as f64).floor();
    if scaled.is_nan() || scaled <= 0.0 {
        0
    } else if scaled >= (levels - 1) as f64 {
        levels - 1
    } else {
        scaled as usize
    }
}

/// Record-based encoding: bind each feature's ID vector with the level vector
/// of its quantized value, then bundle across features.
pub fn encode(features: &[f64], im: &ItemMemory, config: &EncodingConfig) -> Result<IntHv, HdcError> {
    if features.len() != im.num_features() {
        return Err(HdcError::FeatureCount {
            expected: im.num_features(),
            actual: features.len(),
        });
    }
    if config.dim() != im.dim() {
        return Err(HdcError::DimensionMismatch {
            left: config.dim(),
            right: im.dim(),
        });
    }
    let levels = config.levels_of(features)?;
    encode_levels(&levels, im)
}

/// Encodes a sample whose features are already quantized.
pub fn encode_levels(levels: &[usize], im: &ItemMemory) -> Result<IntHv, HdcError> {
    if levels.len() != im.num_features() {
        return Err(HdcError::FeatureCount {
            expected: im.num_features(),
            actual: levels.len(),
        });
    }
    if let Some(&bad) = levels.iter().find(|&&l| l >= im.num_levels()) {
        return Err(HdcError::Config(format!(
            "level {bad} out of range for {} levels",
            im.num_levels()
        )));
    }
    let mut out = IntHv::zeros(im.dim());
    encode_into(levels.iter().copied(), im, out.as_mut_slice());
    Ok(out)
}

/// Adds the encoding of `levels` into `acc`. Levels must already be in range.
pub(crate) fn encode_into(levels: impl Iterator<Item = usize>, im: &ItemMemory, acc: &mut [i32]) {
    for (id, level) in im.id_hvs().iter().zip(levels) {
        let lv = im.level_hvs()[level].as_slice();
        for ((a, &x), &y) in acc.iter_mut().zip(id.as_slice()).zip(lv) {
            *a += i32::from(x * y);
        }
    }
}

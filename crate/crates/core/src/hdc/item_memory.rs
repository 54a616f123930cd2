use super::{BipolarHv, EncodingConfig, HdcError};
use crate::rng::SplitMix64;

/// Nonce-derived base hypervectors: one ID vector per feature and a ladder of
/// correlated level vectors shared by all features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemMemory {
    id_hvs: Vec<BipolarHv>,
    level_hvs: Vec<BipolarHv>,
    dim: usize,
    seed_nonce: u32,
}

impl ItemMemory {
    /// Builds an item memory from explicit vectors. Mostly useful for tests
    /// that need hand-picked bases.
    pub fn from_parts(
        id_hvs: Vec<BipolarHv>,
        level_hvs: Vec<BipolarHv>,
        seed_nonce: u32,
    ) -> Result<Self, HdcError> {
        if id_hvs.is_empty() {
            return Err(HdcError::Config("item memory needs at least one feature".into()));
        }
        if level_hvs.len() < 2 {
            return Err(HdcError::Config("item memory needs at least two levels".into()));
        }
        let dim = id_hvs[0].dim();
        for hv in id_hvs.iter().chain(&level_hvs) {
            if hv.dim() != dim {
                return Err(HdcError::DimensionMismatch {
                    left: dim,
                    right: hv.dim(),
                });
            }
        }
        Ok(Self {
            id_hvs,
            level_hvs,
            dim,
            seed_nonce,
        })
    }

    pub fn id_hvs(&self) -> &[BipolarHv] {
        &self.id_hvs
    }

    pub fn level_hvs(&self) -> &[BipolarHv] {
        &self.level_hvs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_features(&self) -> usize {
        self.id_hvs.len()
    }

    pub fn num_levels(&self) -> usize {
        self.level_hvs.len()
    }

    pub fn seed_nonce(&self) -> u32 {
        self.seed_nonce
    }
}

fn draw(rng: &mut SplitMix64, dim: usize) -> BipolarHv {
    let elems = (0..dim)
        .map(|_| if rng.next_u64() & 1 == 1 { 1 } else { -1 })
        .collect();
    BipolarHv::from_raw(elems)
}

/// Width of the index block flipped between consecutive levels.
pub(crate) fn level_flip_width(dim: usize, num_levels: usize) -> Result<usize, HdcError> {
    if num_levels < 2 {
        return Err(HdcError::Config(format!("need at least 2 levels, got {num_levels}")));
    }
    let width = dim / (2 * (num_levels - 1));
    if width == 0 {
        return Err(HdcError::Config(format!(
            "dimension {dim} too small for {num_levels} levels (needs at least {})",
            2 * (num_levels - 1)
        )));
    }
    Ok(width)
}

/// Generates the item memory for `num_features` features from a nonce.
///
/// The SplitMix64 stream is seeded with the nonce. ID vectors for features
/// `0..m` are drawn first, then level 0, one output per element (bit 0 set
/// gives +1). Level `i` copies level `i - 1` and flips indices
/// `[(i-1)*f, i*f)` where `f = d / (2(L-1))`, so the two extreme levels differ
/// in about half the positions.
pub fn gen_item_memory(
    nonce: u32,
    config: &EncodingConfig,
    num_features: usize,
) -> Result<ItemMemory, HdcError> {
    if num_features == 0 {
        return Err(HdcError::Config("item memory needs at least one feature".into()));
    }
    let dim = config.dim();
    let num_levels = config.num_levels();
    let width = level_flip_width(dim, num_levels)?;

    let mut rng = SplitMix64::from_nonce(nonce);
    let id_hvs: Vec<BipolarHv> = (0..num_features).map(|_| draw(&mut rng, dim)).collect();

    let mut level_hvs = Vec::with_capacity(num_levels);
    let mut level = draw(&mut rng, dim);
    level_hvs.push(level.clone());
    for i in 1..num_levels {
        level.flip_range((i - 1) * width..i * width);
        level_hvs.push(level.clone());
    }

    Ok(ItemMemory {
        id_hvs,
        level_hvs,
        dim,
        seed_nonce: nonce,
    })
}

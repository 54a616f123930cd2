//! Hyperdimensional computing primitives.
//!
//! Everything on the path from a nonce to an accuracy figure lives here and is
//! integer-exact: bipolar item memories, record-based encoding, single-pass
//! training by bundling, and cosine inference decided without floating point.

mod accuracy;
mod encode;
mod hv;
mod item_memory;
mod model;

pub use accuracy::ExactAccuracy;
pub use encode::{encode, encode_levels, quantize, EncodingConfig};
pub(crate) use model::argmax_scores;
pub(crate) use hv::dot;
pub use hv::{BipolarHv, IntHv};
pub use item_memory::{gen_item_memory, ItemMemory};
pub use model::{compare_similarity, evaluate, infer, train, AssociativeMemory};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HdcError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("hypervector must have at least one element")]
    EmptyVector,
    #[error("bipolar element at index {index} is {value}, expected -1 or +1")]
    NotBipolar { index: usize, value: i64 },
    #[error("invalid encoding configuration: {0}")]
    Config(String),
    #[error("expected {expected} features, got {actual}")]
    FeatureCount { expected: usize, actual: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("evaluation set is empty")]
    EmptyTestSet,
}

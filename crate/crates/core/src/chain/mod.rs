//! The ledger: transactions, Merkle roots, headers that commit to the winning
//! nonce and difficulty, validation by recomputation, and on-disk records.

mod block;
mod difficulty;
mod ledger;
mod mempool;
mod merkle;
mod tx;

pub use block::{hash_header, Block, BlockHeader, HEADER_LEN};
pub(crate) use difficulty::decayed as decayed_threshold;
pub use difficulty::{next_difficulty, threshold_allowed, ChainParams, Difficulty, DEFAULT_LADDER};
pub use ledger::{load_chain, save_chain, append_block_record, Chain, ChainViolation, Validator, Violation};
pub use mempool::Mempool;
pub use merkle::merkle_root;
pub use tx::Transaction;

use std::path::PathBuf;

use thiserror::Error;

pub type Hash32 = [u8; 32];

/// Parses `"numer/denom"` without reducing it.
pub fn parse_raw_ratio(text: &str) -> Result<num_rational::Ratio<u32>, String> {
    serde_ratio::parse_raw(text)
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("transaction {0} already submitted")]
    DuplicateTx(String),
    #[error("malformed transaction: {0}")]
    MalformedTx(String),
    #[error("invalid chain parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Violation(#[from] ChainViolation),
    #[error(transparent)]
    Hdc(#[from] crate::hdc::HdcError),
}

pub(crate) mod serde_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let text = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&text, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}

/// Ratios as `"numer/denom"` strings, kept unreduced so the hashed bytes are
/// exactly what was written.
pub(crate) mod serde_ratio {
    use num_rational::Ratio;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Ratio<u32>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio<u32>, D::Error> {
        let text = String::deserialize(d)?;
        parse_raw(&text).map_err(serde::de::Error::custom)
    }

    pub fn parse_raw(text: &str) -> Result<Ratio<u32>, String> {
        let (n, den) = text
            .split_once('/')
            .ok_or_else(|| format!("'{text}' is not of the form numer/denom"))?;
        let n: u32 = n.parse().map_err(|_| format!("bad numerator in '{text}'"))?;
        let den: u32 = den.parse().map_err(|_| format!("bad denominator in '{text}'"))?;
        if den == 0 {
            return Err(format!("zero denominator in '{text}'"));
        }
        Ok(Ratio::new_raw(n, den))
    }
}

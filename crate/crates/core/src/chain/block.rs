use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{merkle_root, Difficulty, Hash32, Transaction};
use crate::dataset::DatasetHash;
use crate::hdc::ExactAccuracy;

/// Size in bytes of the canonical header encoding.
pub const HEADER_LEN: usize = 140;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub height: u64,
    #[serde(with = "super::serde_hex")]
    pub prev_hash: Hash32,
    #[serde(with = "super::serde_hex")]
    pub merkle_root: Hash32,
    #[serde(with = "dataset_hash_hex")]
    pub dataset_hash: DatasetHash,
    pub nonce: u32,
    pub accuracy_claim: ExactAccuracy,
    pub difficulty: Difficulty,
    /// Milliseconds on the simulation clock.
    pub timestamp: u64,
}

mod dataset_hash_hex {
    use super::DatasetHash;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(h: &DatasetHash, s: S) -> Result<S::Ok, S::Error> {
        super::super::serde_hex::serialize(&h.0, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DatasetHash, D::Error> {
        super::super::serde_hex::deserialize(d).map(DatasetHash)
    }
}

impl BlockHeader {
    /// Big-endian, fixed order: height(8) prev_hash(32) merkle_root(32)
    /// dataset_hash(32) nonce(4) correct(4) total(4) dimension(4)
    /// threshold numer(4) threshold denom(4) num_levels(4) timestamp(8).
    pub fn canonical_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        let mut at = 0;
        let mut put = |bytes: &[u8]| {
            out[at..at + bytes.len()].copy_from_slice(bytes);
            at += bytes.len();
        };
        put(&self.height.to_be_bytes());
        put(&self.prev_hash);
        put(&self.merkle_root);
        put(&self.dataset_hash.0);
        put(&self.nonce.to_be_bytes());
        put(&self.accuracy_claim.correct.to_be_bytes());
        put(&self.accuracy_claim.total.to_be_bytes());
        put(&self.difficulty.dimension.to_be_bytes());
        put(&self.difficulty.accuracy_threshold.numer().to_be_bytes());
        put(&self.difficulty.accuracy_threshold.denom().to_be_bytes());
        put(&self.difficulty.num_levels.to_be_bytes());
        put(&self.timestamp.to_be_bytes());
        debug_assert_eq!(at, HEADER_LEN);
        out
    }
}

pub fn hash_header(header: &BlockHeader) -> Hash32 {
    Sha256::digest(header.canonical_bytes()).into()
}

/// A sealed block. `hash` is the header hash recorded at sealing time;
/// validation recomputes it, so any later header edit is caught at this height.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    #[serde(with = "super::serde_hex")]
    pub hash: Hash32,
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    /// Fills in the Merkle root from `transactions` and seals the header hash.
    pub fn seal(mut header: BlockHeader, transactions: Vec<Transaction>) -> Self {
        header.merkle_root = merkle_root(&transactions);
        Self {
            hash: hash_header(&header),
            header,
            transactions,
        }
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn zero_header() -> BlockHeader {
        BlockHeader {
            height: 0,
            prev_hash: [0; 32],
            merkle_root: [0; 32],
            dataset_hash: DatasetHash([0; 32]),
            nonce: 0,
            accuracy_claim: ExactAccuracy::new(0, 0),
            difficulty: Difficulty {
                dimension: 0,
                accuracy_threshold: Ratio::new_raw(0, 0),
                num_levels: 0,
            },
            timestamp: 0,
        }
    }

    // SHA-256 of 140 zero bytes, from Python hashlib.
    #[test]
    fn all_zero_header_reference() {
        let h = zero_header();
        assert_eq!(h.canonical_bytes(), [0u8; HEADER_LEN]);
        assert_eq!(
            hex::encode(hash_header(&h)),
            "24045c10c12a89f4c11e3b88ea34558fcdf926a8c1008cd08cc33bc71407c774"
        );
    }

    #[test]
    fn field_order() {
        let mut h = zero_header();
        h.height = 1;
        h.nonce = 0x0102_0304;
        h.timestamp = 0xAABB;
        let bytes = h.canonical_bytes();
        assert_eq!(bytes[7], 1);
        assert_eq!(&bytes[104..108], &[1, 2, 3, 4]);
        assert_eq!(&bytes[138..140], &[0xAA, 0xBB]);
    }

    #[test]
    fn nonce_changes_hash() {
        let mut h = zero_header();
        let before = hash_header(&h);
        assert_eq!(before, hash_header(&h.clone()));
        h.nonce += 1;
        assert_ne!(hash_header(&h), before);
    }
}

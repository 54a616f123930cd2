use sha2::{Digest, Sha256};

use super::{Hash32, Transaction};

fn hash_pair(left: &Hash32, right: &Hash32) -> Hash32 {
    let mut h = Sha256::new();
    h.update(left);
    h.update(right);
    h.finalize().into()
}

/// Binary SHA-256 tree over transaction ids. An odd node at any level pairs
/// with itself; a single leaf is its own root; no transactions hash to
/// `SHA-256("")`.
pub fn merkle_root(txs: &[Transaction]) -> Hash32 {
    if txs.is_empty() {
        return Sha256::digest([]).into();
    }
    let mut level: Vec<Hash32> = txs.iter().map(|t| t.tx_id).collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| hash_pair(&pair[0], pair.get(1).unwrap_or(&pair[0])))
            .collect();
    }
    level[0]
}

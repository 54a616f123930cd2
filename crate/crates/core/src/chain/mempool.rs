use std::collections::{BTreeMap, HashSet};
use std::sync::Mutex;

use super::{ChainError, Hash32, Transaction};

#[derive(Debug, Default)]
struct Pool {
    pending: BTreeMap<(u64, Hash32), Transaction>,
    seen: HashSet<Hash32>,
}

/// Unconfirmed transactions, handed out oldest first (timestamp, then tx id
/// bytes). Submission is safe from many threads; takes are serialized.
#[derive(Debug, Default)]
pub struct Mempool {
    inner: Mutex<Pool>,
}

impl Mempool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rejects malformed transactions and any id seen before, including ones
    /// already taken.
    pub fn submit_tx(&self, tx: Transaction) -> Result<(), ChainError> {
        if !tx.is_well_formed() {
            return Err(ChainError::MalformedTx(hex::encode(tx.tx_id)));
        }
        if tx.is_coinbase() {
            return Err(ChainError::MalformedTx("coinbase transactions cannot be submitted".into()));
        }
        let mut pool = self.inner.lock().expect("mempool lock poisoned");
        if !pool.seen.insert(tx.tx_id) {
            return Err(ChainError::DuplicateTx(hex::encode(tx.tx_id)));
        }
        pool.pending.insert((tx.timestamp, tx.tx_id), tx);
        Ok(())
    }

    pub fn take_txs(&self, n: usize) -> Vec<Transaction> {
        let mut pool = self.inner.lock().expect("mempool lock poisoned");
        let keys: Vec<_> = pool.pending.keys().take(n).copied().collect();
        keys.iter().filter_map(|k| pool.pending.remove(k)).collect()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("mempool lock poisoned").pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

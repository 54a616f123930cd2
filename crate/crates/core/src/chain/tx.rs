use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChainError, Hash32};

const COINBASE_PREFIX: &str = "coinbase#";

/// A toy value transfer. Only its form is validated; there are no signatures
/// or balances.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    #[serde(with = "super::serde_hex")]
    pub tx_id: Hash32,
    pub from_account: String,
    pub to_account: String,
    pub amount: u64,
    pub timestamp: u64,
}

impl Transaction {
    pub fn new(
        from_account: impl Into<String>,
        to_account: impl Into<String>,
        amount: u64,
        timestamp: u64,
    ) -> Result<Self, ChainError> {
        if amount == 0 {
            return Err(ChainError::MalformedTx("amount must be positive".into()));
        }
        let mut tx = Self {
            tx_id: [0; 32],
            from_account: from_account.into(),
            to_account: to_account.into(),
            amount,
            timestamp,
        };
        tx.tx_id = tx.compute_id();
        Ok(tx)
    }

    /// The reward transaction paying the round winner; always first in a block.
    pub fn coinbase(height: u64, winner: &str, reward: u64, timestamp: u64) -> Result<Self, ChainError> {
        Self::new(format!("{COINBASE_PREFIX}{height}"), winner, reward, timestamp)
    }

    /// Canonical bytes: length-prefixed (u32 BE) UTF-8 accounts, then amount
    /// and timestamp as u64 BE.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.from_account.len() + self.to_account.len());
        for account in [&self.from_account, &self.to_account] {
            out.extend_from_slice(&(account.len() as u32).to_be_bytes());
            out.extend_from_slice(account.as_bytes());
        }
        out.extend_from_slice(&self.amount.to_be_bytes());
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        out
    }

    pub fn compute_id(&self) -> Hash32 {
        Sha256::digest(self.canonical_bytes()).into()
    }

    pub fn is_well_formed(&self) -> bool {
        self.amount > 0 && self.tx_id == self.compute_id()
    }

    pub fn is_coinbase(&self) -> bool {
        self.from_account.starts_with(COINBASE_PREFIX)
    }

    pub(crate) fn coinbase_height(&self) -> Option<u64> {
        self.from_account.strip_prefix(COINBASE_PREFIX)?.parse().ok()
    }
}

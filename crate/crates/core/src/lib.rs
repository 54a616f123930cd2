//! HDCoin: a proof-of-useful-work ledger whose mining work is the nonce-seeded
//! training of hyperdimensional classifiers.
//!
//! A miner turns a 32-bit nonce into an item memory, encodes the training set,
//! bundles class vectors and scores the inference set. The nonce with the best
//! exact accuracy wins the block, and every peer checks it by running the same
//! trial again.

pub mod chain;
pub mod config;
pub mod consensus;
pub mod dataset;
pub mod hdc;
pub mod miner;
pub mod rng;

//! Sharded network: randomness beacon, epoch-wise validator reassignment,
//! per-shard block production, cross-shard swaps, and a seeded
//! discrete-event simulator that ties them together.
//!
//! Simulated time is kept in integer microseconds.

mod assignment;
mod beacon;
mod block;
mod config;
mod sim;
mod swap;

use thiserror::Error;

use crate::consensus::ConsensusError;
use crate::crypto::{CryptoError, HashDigest};
use crate::ledger::LedgerError;

pub use assignment::{assign_validators, capture_frequency, CaptureReport, ShardAssignment};
pub use beacon::{beacon_next, BeaconChain};
pub use block::{
    produce_block, Block, BlockLimits, BlockOutcome, Rejection, ShardState, MAX_BLOCK_BYTES,
    OTHER_TX_BYTES_NOMINAL, PROOF_BYTES_NOMINAL, SIGNATURE_BYTES_NOMINAL,
};
pub use config::{to_micros, NetworkConfig};
pub use sim::{events_to_jsonl, run_simulation, EventRecord, SimConfig, SimOutcome, SimReport};
pub use swap::{
    swap_complete, swap_initiate, swap_relay, swap_timeout, CrossShardSwap, SwapInitiation,
    SwapLockStatement, SwapLockWitness, SwapRelay, SwapState,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("swap {0} is past its deadline or already refunded")]
    StaleSwap(HashDigest),
    #[error("relay proof for swap {0} does not verify")]
    BadRelayProof(HashDigest),
    #[error("audit failed: {0}")]
    AuditFailed(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

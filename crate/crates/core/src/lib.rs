//! Protocol library and discrete-event simulator for a sharded,
//! quantum-resilient privacy ledger.
//!
//! Modules map onto the layers of the system:
//!
//! - [`crypto`]: hashing, commitments, simulated post-quantum signatures,
//!   VRF, and a transparent-oracle proof system.
//! - [`ledger`]: the UTXO state machine.
//! - [`consensus`]: privacy-weighted proof-of-stake.
//! - [`network`]: beacon, shard assignment, block production, cross-shard
//!   swaps and the event-driven simulator.
//! - [`offline`]: device-to-device vouchers and reconciliation.
//! - [`issuance`]: threshold-approved mint and redeem with an audit trail.
//! - [`perf`]: throughput, latency and storage models.

pub mod consensus;
pub mod crypto;
pub mod encoding;
pub mod fraction;
pub mod issuance;
pub mod ledger;
pub mod network;
pub mod offline;
pub mod perf;
pub mod rng;

//! UTXO ledger: transaction construction, validation, application and
//! challenge-period pruning.

mod snapshot;
mod state;
mod transaction;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{CryptoError, HashDigest};

pub use snapshot::{LedgerDump, TokenDump};
pub use state::{FeePolicy, LedgerState, PruningConfig, SupplyFlows, ONE_YEAR_OF_BLOCKS};
pub use transaction::{
    blinding_for, build_transaction, compute_tx_hash, derive_output_key, Payment,
    PreparedTransaction, Transaction, TransferStatement, TransferWitness, UtxoToken, MAX_TX_ITEMS,
};

/// Currency in minor units.
pub type Amount = u64;
pub type Height = u64;
pub type TokenId = HashDigest;

/// Minor units per major currency unit.
pub const MINOR_PER_MAJOR: Amount = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    DoubleSpend,
    UnknownInput,
    Imbalance,
    BadProof,
    BadSignature,
    Malformed,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("Value imbalance in transaction: inputs {inputs} != outputs {outputs} + fee {fee}")]
    Imbalance {
        inputs: Amount,
        outputs: Amount,
        fee: Amount,
    },
    #[error("unknown or spent input {0}")]
    UnknownInput(TokenId),
    #[error("token {0} already spent")]
    DoubleSpend(TokenId),
    #[error("input {0} not owned by sender")]
    NotOwner(TokenId),
    #[error("token {0} already exists")]
    DuplicateToken(TokenId),
    #[error("malformed: {0}")]
    Malformed(&'static str),
    #[error("amount overflow")]
    Overflow,
    #[error("protocol violation: transaction verdict {0:?}")]
    ProtocolViolation(Verdict),
    #[error("audit failed: {0}")]
    AuditFailed(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

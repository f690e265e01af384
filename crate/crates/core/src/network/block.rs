use std::collections::VecDeque;

use serde::Serialize;

use super::{BeaconChain, NetworkError};
use crate::consensus::{select_proposer, ConsensusParams, ShardId, Validator, ValidatorId};
use crate::crypto::{hash_fields, HashDigest, VrfOutput};
use crate::ledger::{Height, LedgerState, Transaction, Verdict};

pub const SIGNATURE_BYTES_NOMINAL: u64 = 2_560;
pub const PROOF_BYTES_NOMINAL: u64 = 102_400;
pub const OTHER_TX_BYTES_NOMINAL: u64 = 1_024;
pub const MAX_BLOCK_BYTES: u64 = 4_096 * 1_024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockLimits {
    pub max_txs: usize,
    pub max_bytes: u64,
    /// Size charged against `max_bytes` for every included transaction.
    pub tx_bytes: u64,
}

impl Default for BlockLimits {
    fn default() -> Self {
        BlockLimits {
            max_txs: 20,
            max_bytes: MAX_BLOCK_BYTES,
            tx_bytes: SIGNATURE_BYTES_NOMINAL + PROOF_BYTES_NOMINAL + OTHER_TX_BYTES_NOMINAL,
        }
    }
}

impl BlockLimits {
    /// Transactions that fit by size alone.
    pub fn byte_capacity(&self) -> u64 {
        self.max_bytes
            .checked_div(self.tx_bytes)
            .unwrap_or(u64::MAX)
    }

    /// Binding limit: the smaller of the count budget and byte capacity.
    pub fn effective_capacity(&self) -> usize {
        usize::try_from(self.byte_capacity()).map_or(self.max_txs, |b| b.min(self.max_txs))
    }
}

/// Per-shard chain state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardState {
    pub shard: ShardId,
    pub ledger: LedgerState,
    pub tip: HashDigest,
}

impl ShardState {
    pub fn new(shard: ShardId, ledger: LedgerState) -> Self {
        ShardState {
            shard,
            ledger,
            tip: HashDigest::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub shard: ShardId,
    pub height: Height,
    pub parent: HashDigest,
    pub beacon_round: u64,
    pub proposer: ValidatorId,
    pub proposer_vrf: VrfOutput,
    pub time_us: u64,
    pub transactions: Vec<Transaction>,
    pub hash: HashDigest,
}

/// A mempool entry that failed validation while the block was assembled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub tx: Transaction,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
pub struct BlockOutcome {
    pub block: Block,
    pub rejected: Vec<Rejection>,
}

fn block_hash(
    shard: ShardId,
    height: Height,
    parent: &HashDigest,
    proposer: ValidatorId,
    vrf: &VrfOutput,
    time_us: u64,
    txs: &[Transaction],
) -> HashDigest {
    let tx_hashes: Vec<HashDigest> = txs.iter().map(|t| t.tx_hash).collect();
    hash_fields("qrpl/block", |e| {
        e.u16(shard)
            .u64(height)
            .nested(parent)
            .u32(proposer)
            .nested(vrf)
            .u64(time_us)
            .list(&tx_hashes);
    })
}

/// Advances the shard by one block proposed by `claimed_proposer`.
///
/// The claim is checked against the VRF selection over `members`. The
/// mempool is drained in order: accepted transactions are applied until the
/// budget is exhausted, rejected ones are dropped and reported. Anything left
/// over stays queued.
#[allow(clippy::too_many_arguments)]
pub fn produce_block(
    state: &mut ShardState,
    mempool: &mut VecDeque<Transaction>,
    members: &[Validator],
    claimed_proposer: ValidatorId,
    beacon: &BeaconChain,
    params: &ConsensusParams,
    limits: &BlockLimits,
    time_us: u64,
) -> Result<BlockOutcome, NetworkError> {
    let selection = select_proposer(members, &beacon.value, beacon.round, params)?;
    if selection.proposer != claimed_proposer {
        return Err(NetworkError::ProtocolViolation(format!(
            "shard {} round {}: proposer {} claimed, {} selected",
            state.shard, beacon.round, claimed_proposer, selection.proposer
        )));
    }
    let height = state.ledger.advance_height();
    let capacity = limits.effective_capacity();
    let mut included = Vec::new();
    let mut rejected = Vec::new();
    while included.len() < capacity {
        let Some(tx) = mempool.pop_front() else { break };
        match state.ledger.validate_transaction(&tx) {
            Verdict::Accept => {
                state.ledger.apply_transaction(&tx)?;
                included.push(tx);
            }
            verdict => rejected.push(Rejection { tx, verdict }),
        }
    }
    let hash = block_hash(
        state.shard,
        height,
        &state.tip,
        claimed_proposer,
        &selection.vrf,
        time_us,
        &included,
    );
    let block = Block {
        shard: state.shard,
        height,
        parent: state.tip,
        beacon_round: beacon.round,
        proposer: claimed_proposer,
        proposer_vrf: selection.vrf,
        time_us,
        transactions: included,
        hash,
    };
    state.tip = hash;
    Ok(BlockOutcome { block, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_block_holds_39_transactions_by_size() {
        let limits = BlockLimits::default();
        assert_eq!(limits.tx_bytes, 105_984);
        assert_eq!(limits.byte_capacity(), 39);
        assert_eq!(limits.effective_capacity(), 20);
        let unbounded = BlockLimits {
            max_txs: 1_000,
            ..limits
        };
        assert_eq!(unbounded.effective_capacity(), 39);
    }
}

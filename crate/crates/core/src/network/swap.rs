use rand::Rng;
use serde::Serialize;

use super::NetworkError;
use crate::consensus::ShardId;
use crate::crypto::{
    self, commit, derive_ephemeral_with_nonce, hash_fields, open, Blinding, HashDigest, KeyPair,
    ProofArtifact, ProverMode, PublicKey, Statement,
};
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder};
use crate::ledger::{blinding_for, Amount, LedgerState, TokenId, UtxoToken};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapState {
    Init,
    LockedAtSource,
    ProofRelayed,
    UnlockedAtTarget,
    Refunded,
}

impl SwapState {
    pub fn is_terminal(self) -> bool {
        matches!(self, SwapState::UnlockedAtTarget | SwapState::Refunded)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossShardSwap {
    pub swap_id: HashDigest,
    pub source: ShardId,
    pub target: ShardId,
    #[serde(skip)]
    pub locked_token: UtxoToken,
    #[serde(skip)]
    pub recipient: PublicKey,
    pub state: SwapState,
    pub initiated_us: u64,
    pub deadline_us: u64,
    pub finished_us: Option<u64>,
}

impl CrossShardSwap {
    pub fn value(&self) -> Amount {
        self.locked_token.value
    }

    /// Value held in the source lock and not yet settled either way.
    pub fn in_flight_value(&self) -> Amount {
        match self.state {
            SwapState::LockedAtSource | SwapState::ProofRelayed => self.value(),
            _ => 0,
        }
    }
}

/// Proves a locked source token backs the token to be minted on the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapLockStatement {
    pub swap_id: HashDigest,
    pub source: ShardId,
    pub target: ShardId,
    pub locked_token: TokenId,
    pub target_output: UtxoToken,
}

pub struct SwapLockWitness {
    pub locked: UtxoToken,
    pub output_blinding: Blinding,
}

impl Canonical for SwapLockStatement {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.nested(&self.swap_id)
            .u16(self.source)
            .u16(self.target)
            .nested(&self.locked_token)
            .nested(&self.target_output);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(SwapLockStatement {
            swap_id: dec.nested()?,
            source: dec.u16()?,
            target: dec.u16()?,
            locked_token: dec.nested()?,
            target_output: dec.nested()?,
        })
    }
}

impl Statement for SwapLockStatement {
    const KIND: &'static str = "swap-lock";
    type Witness = SwapLockWitness;

    fn is_satisfied(&self, w: &SwapLockWitness) -> bool {
        w.locked.token_id == self.locked_token
            && w.locked.is_consistent()
            && self.target_output.is_consistent()
            && self.target_output.value == w.locked.value
            && open(
                &self.target_output.commitment,
                self.target_output.value,
                &w.output_blinding,
            )
    }
}

/// Message carried from the source shard to the target shard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapRelay {
    pub swap_id: HashDigest,
    pub target_output: UtxoToken,
    pub proof: ProofArtifact,
}

#[derive(Debug, Clone)]
pub struct SwapInitiation {
    pub swap: CrossShardSwap,
    pub relay: SwapRelay,
    /// One-time key for the target token, handed to the recipient.
    pub recipient_key: KeyPair,
}

fn statement_for(swap: &CrossShardSwap, relay: &SwapRelay) -> SwapLockStatement {
    SwapLockStatement {
        swap_id: swap.swap_id,
        source: swap.source,
        target: swap.target,
        locked_token: swap.locked_token.token_id,
        target_output: relay.target_output.clone(),
    }
}

/// Locks `token_id` on the source ledger and prepares the relay message.
#[allow(clippy::too_many_arguments)]
pub fn swap_initiate(
    source_ledger: &mut LedgerState,
    source: ShardId,
    target: ShardId,
    token_id: &TokenId,
    owner: &KeyPair,
    recipient: &PublicKey,
    now_us: u64,
    timeout_us: u64,
    rng: &mut impl Rng,
) -> Result<SwapInitiation, NetworkError> {
    if source == target {
        return Err(NetworkError::Config(
            "swap source and target must differ".into(),
        ));
    }
    let token = source_ledger
        .get_unspent(token_id)
        .ok_or(crate::ledger::LedgerError::UnknownInput(*token_id))?
        .clone();
    if token.owner_epk != *owner.public_key() {
        return Err(crate::ledger::LedgerError::NotOwner(*token_id).into());
    }
    let swap_id = hash_fields("qrpl/swap", |e| {
        e.u16(source)
            .u16(target)
            .nested(token_id)
            .nested(recipient)
            .u64(now_us);
    });
    let recipient_key = derive_ephemeral_with_nonce(
        recipient.scheme(),
        &owner.secret_key().0,
        &recipient.to_canonical_bytes(),
        swap_id.as_bytes(),
    )?;
    let output_blinding = blinding_for(&recipient_key);
    let target_output = UtxoToken::new(
        commit(token.value, &output_blinding),
        token.value,
        recipient_key.public_key().clone(),
        0,
    );
    let statement = SwapLockStatement {
        swap_id,
        source,
        target,
        locked_token: *token_id,
        target_output: target_output.clone(),
    };
    let witness = SwapLockWitness {
        locked: token.clone(),
        output_blinding,
    };
    let proof = crypto::prove(&statement, &witness, ProverMode::Honest, rng)?;
    let relay = SwapRelay {
        swap_id,
        target_output,
        proof,
    };
    let mut swap = CrossShardSwap {
        swap_id,
        source,
        target,
        locked_token: token,
        recipient: recipient.clone(),
        state: SwapState::Init,
        initiated_us: now_us,
        deadline_us: now_us.saturating_add(timeout_us),
        finished_us: None,
    };
    source_ledger.lock(token_id)?;
    swap.state = SwapState::LockedAtSource;
    Ok(SwapInitiation {
        swap,
        relay,
        recipient_key,
    })
}

fn check_relay(swap: &CrossShardSwap, relay: &SwapRelay) -> Result<(), NetworkError> {
    if relay.swap_id != swap.swap_id
        || !crypto::verify_proof(&statement_for(swap, relay), &relay.proof)
    {
        return Err(NetworkError::BadRelayProof(swap.swap_id));
    }
    Ok(())
}

fn check_open(swap: &CrossShardSwap, now_us: u64) -> Result<(), NetworkError> {
    match swap.state {
        SwapState::Refunded => Err(NetworkError::StaleSwap(swap.swap_id)),
        SwapState::UnlockedAtTarget => Err(NetworkError::ProtocolViolation(format!(
            "swap {} already completed",
            swap.swap_id
        ))),
        SwapState::Init => Err(NetworkError::ProtocolViolation(format!(
            "swap {} not locked",
            swap.swap_id
        ))),
        _ if now_us > swap.deadline_us => Err(NetworkError::StaleSwap(swap.swap_id)),
        _ => Ok(()),
    }
}

/// Records arrival of a verified relay at the target shard.
pub fn swap_relay(
    swap: &mut CrossShardSwap,
    relay: &SwapRelay,
    now_us: u64,
) -> Result<(), NetworkError> {
    check_open(swap, now_us)?;
    check_relay(swap, relay)?;
    swap.state = SwapState::ProofRelayed;
    Ok(())
}

/// Mints the target token and burns the source lock in one step. Returns the
/// id of the new target token.
pub fn swap_complete(
    swap: &mut CrossShardSwap,
    relay: &SwapRelay,
    source_ledger: &mut LedgerState,
    target_ledger: &mut LedgerState,
    now_us: u64,
) -> Result<TokenId, NetworkError> {
    check_open(swap, now_us)?;
    check_relay(swap, relay)?;
    let locked_id = swap.locked_token.token_id;
    if !source_ledger.locked().contains_key(&locked_id) {
        return Err(NetworkError::ProtocolViolation(format!(
            "swap {} has no source lock",
            swap.swap_id
        )));
    }
    let minted_id = relay.target_output.token_id;
    target_ledger.mint_swapped_in(relay.target_output.clone())?;
    source_ledger.burn_locked(&locked_id)?;
    swap.state = SwapState::UnlockedAtTarget;
    swap.finished_us = Some(now_us);
    Ok(minted_id)
}

/// Refunds the source lock once the deadline has passed. Returns whether a
/// refund happened; terminal or not-yet-expired swaps are left untouched.
pub fn swap_timeout(
    swap: &mut CrossShardSwap,
    source_ledger: &mut LedgerState,
    now_us: u64,
) -> Result<bool, NetworkError> {
    if swap.state.is_terminal() || swap.state == SwapState::Init || now_us < swap.deadline_us {
        return Ok(false);
    }
    source_ledger.unlock(&swap.locked_token.token_id)?;
    swap.state = SwapState::Refunded;
    swap.finished_us = Some(now_us);
    Ok(true)
}

//! Privacy-weighted proof of stake.
//!
//! A validator's weight is `stake + alpha * activity`, where activity is the
//! cumulative fees the validator has paid in the previous epoch, attested by
//! a proof. Proposers are drawn by exponent-transformed VRF outputs, which
//! samples each validator with probability proportional to its weight.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::crypto::{
    hash_fields, verify_proof, vrf_eval, vrf_verify, HashDigest, KeyPair, ProofArtifact, Statement,
    VrfOutput,
};
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder};
use crate::fraction::{Fraction, FractionError};
use crate::ledger::{Amount, Height};

pub type ValidatorId = u32;
pub type ShardId = u16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParams { name: &'static str, reason: String },
    #[error("no validator with positive weight")]
    NoEligibleValidator,
    #[error("activity proof for validator {0} does not verify")]
    BadActivityProof(ValidatorId),
    #[error(transparent)]
    Arithmetic(#[from] FractionError),
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ConsensusError {
    ConsensusError::InvalidParams {
        name,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validator {
    pub id: ValidatorId,
    pub stake: Amount,
    pub activity: Amount,
    pub keypair: KeyPair,
    pub shard: ShardId,
}

impl Validator {
    pub fn new(id: ValidatorId, stake: Amount, keypair: KeyPair) -> Self {
        Validator {
            id,
            stake,
            activity: 0,
            keypair,
            shard: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusParams {
    pub alpha_weight: Fraction,
    pub slash_penalty: Fraction,
    pub fee_rate: Fraction,
    pub epoch_blocks: u64,
    pub adversary_bound: Fraction,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        let f = |n, d| Fraction::new(n, d).expect("nonzero denominator");
        ConsensusParams {
            alpha_weight: f(1, 2),
            slash_penalty: f(1, 10),
            fee_rate: f(1, 10_000),
            epoch_blocks: 360,
            adversary_bound: f(33, 100),
        }
    }
}

impl ConsensusParams {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        for (name, v) in [
            ("alpha_weight", self.alpha_weight),
            ("slash_penalty", self.slash_penalty),
            ("fee_rate", self.fee_rate),
            ("adversary_bound", self.adversary_bound),
        ] {
            if !v.is_proper() {
                return Err(invalid(name, format!("{v} not in (0, 1)")));
            }
        }
        if self.epoch_blocks == 0 {
            return Err(invalid("epoch_blocks", "must be at least 1"));
        }
        Ok(())
    }
}

pub fn compute_weight(validator: &Validator, params: &ConsensusParams) -> Fraction {
    Fraction::from(validator.stake) + params.alpha_weight * Fraction::from(validator.activity)
}

/// Claims a validator paid exactly `fees_paid` in fees during `epoch`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeeTotalStatement {
    pub validator: ValidatorId,
    pub epoch: u64,
    pub fees_paid: Amount,
}

impl Canonical for FeeTotalStatement {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.u32(self.validator).u64(self.epoch).u64(self.fees_paid);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(FeeTotalStatement {
            validator: dec.u32()?,
            epoch: dec.u64()?,
            fees_paid: dec.u64()?,
        })
    }
}

impl Statement for FeeTotalStatement {
    const KIND: &'static str = "fee-total";
    /// Individual fee receipts.
    type Witness = [Amount];

    fn is_satisfied(&self, receipts: &[Amount]) -> bool {
        receipts.iter().try_fold(0u64, |a, f| a.checked_add(*f)) == Some(self.fees_paid)
    }
}

/// Adds proven fees to the validator's activity score.
pub fn accrue_activity(
    validator: &Validator,
    fees_paid: Amount,
    epoch: u64,
    proof: &ProofArtifact,
) -> Result<Validator, ConsensusError> {
    let statement = FeeTotalStatement {
        validator: validator.id,
        epoch,
        fees_paid,
    };
    if !verify_proof(&statement, proof) {
        return Err(ConsensusError::BadActivityProof(validator.id));
    }
    let mut next = validator.clone();
    next.activity = next.activity.saturating_add(fees_paid);
    Ok(next)
}

/// Clears accrued activity at an epoch boundary.
pub fn reset_epoch_activity(validators: &mut [Validator]) {
    for v in validators {
        v.activity = 0;
    }
}

pub fn selection_input(beacon_value: &HashDigest, round: u64) -> Vec<u8> {
    hash_fields("qrpl/proposer", |e| {
        e.nested(beacon_value).u64(round);
    })
    .0
    .to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProposerSelection {
    pub proposer: ValidatorId,
    pub vrf: VrfOutput,
}

/// Picks the validator maximising `u^(1/w)` over VRF fractions `u`, compared
/// as `ln(u) / w`. Ties go to the lowest id.
pub fn select_proposer(
    validators: &[Validator],
    beacon_value: &HashDigest,
    round: u64,
    params: &ConsensusParams,
) -> Result<ProposerSelection, ConsensusError> {
    let input = selection_input(beacon_value, round);
    let mut best: Option<(f64, ValidatorId, VrfOutput)> = None;
    for v in validators {
        let weight = compute_weight(v, params).to_f64();
        if weight <= 0.0 {
            continue;
        }
        let vrf = vrf_eval(&v.keypair, &input);
        let score = vrf.fraction().ln() / weight;
        let better = match &best {
            None => true,
            Some((s, id, _)) => score > *s || (score == *s && v.id < *id),
        };
        if better {
            best = Some((score, v.id, vrf));
        }
    }
    best.map(|(_, proposer, vrf)| ProposerSelection { proposer, vrf })
        .ok_or(ConsensusError::NoEligibleValidator)
}

/// Checks that `selection` is the outcome of [`select_proposer`] and that
/// the winner's VRF output verifies.
pub fn verify_proposer(
    validators: &[Validator],
    beacon_value: &HashDigest,
    round: u64,
    params: &ConsensusParams,
    selection: &ProposerSelection,
) -> bool {
    let Some(winner) = validators.iter().find(|v| v.id == selection.proposer) else {
        return false;
    };
    let input = selection_input(beacon_value, round);
    vrf_verify(winner.keypair.public_key(), &input, &selection.vrf)
        && select_proposer(validators, beacon_value, round, params)
            .ok()
            .as_ref()
            == Some(selection)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlashReason {
    DoubleSign,
    InvalidBlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlashingEvent {
    pub validator: ValidatorId,
    pub reason: SlashReason,
    pub height: Height,
    pub stake_before: Amount,
    pub stake_after: Amount,
    /// Set when the slash had no effect because the stake was already zero.
    pub warning: Option<String>,
}

/// `stake' = floor(stake * (1 - penalty))`.
pub fn slash(
    validator: &Validator,
    params: &ConsensusParams,
    reason: SlashReason,
    height: Height,
) -> (Validator, SlashingEvent) {
    let stake_before = validator.stake;
    let mut next = validator.clone();
    let warning = if stake_before == 0 {
        warn!(validator = validator.id, "slash on zero stake ignored");
        Some("zero stake; slash skipped".to_string())
    } else {
        let kept = (Fraction::from(stake_before) * (Fraction::ONE - params.slash_penalty)).floor();
        next.stake = Amount::try_from(kept.max(0)).unwrap_or(0);
        None
    };
    let event = SlashingEvent {
        validator: validator.id,
        reason,
        height,
        stake_before,
        stake_after: next.stake,
        warning,
    };
    (next, event)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AttackCostReport {
    pub weight_gain: Fraction,
    pub required_activity: Fraction,
    pub sham_volume: Fraction,
    pub fee_cost: Fraction,
    pub profitable: bool,
}

/// Cost of buying a `target_relative_gain` share of consensus weight through
/// sham activity: the score needed is `gain * S / alpha`, paid as fees at
/// `fee_rate` on `score / fee_rate` of volume.
pub fn attack_cost(
    total_stake: Amount,
    params: &ConsensusParams,
    target_relative_gain: Fraction,
    block_reward_value: Amount,
) -> Result<AttackCostReport, ConsensusError> {
    if target_relative_gain < Fraction::ZERO || target_relative_gain >= Fraction::ONE {
        return Err(invalid(
            "target_relative_gain",
            format!("{target_relative_gain} not in [0, 1)"),
        ));
    }
    let weight_gain = target_relative_gain * Fraction::from(total_stake);
    let required_activity = weight_gain.checked_div(params.alpha_weight)?;
    let sham_volume = required_activity.checked_div(params.fee_rate)?;
    let fee_cost = required_activity;
    Ok(AttackCostReport {
        weight_gain,
        required_activity,
        sham_volume,
        fee_cost,
        profitable: Fraction::from(block_reward_value) > fee_cost,
    })
}

/// Share of stake and of weight held by `adversaries` among `validators`.
pub fn adversary_shares(
    validators: &[Validator],
    is_adversary: impl Fn(ValidatorId) -> bool,
    params: &ConsensusParams,
) -> (f64, f64) {
    let mut stake = (0u128, 0u128);
    let mut weight = (Fraction::ZERO, Fraction::ZERO);
    for v in validators {
        let w = compute_weight(v, params);
        stake.1 += u128::from(v.stake);
        weight.1 = weight.1 + w;
        if is_adversary(v.id) {
            stake.0 += u128::from(v.stake);
            weight.0 = weight.0 + w;
        }
    }
    let stake_share = if stake.1 == 0 {
        0.0
    } else {
        stake.0 as f64 / stake.1 as f64
    };
    let weight_share = weight
        .0
        .checked_div(weight.1)
        .map(|f| f.to_f64())
        .unwrap_or(0.0);
    (stake_share, weight_share)
}

//! Central-bank issuance: tokens are minted against fiat deposits and burned
//! on redemption at one-to-one parity, each operation approved by a threshold
//! of oracle signers and recorded in a hash-chained audit trail.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::crypto::{commit, hash, hash_fields, verify, HashDigest, PublicKey, Signature};
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder};
use crate::ledger::{Amount, Height, LedgerError, LedgerState, TokenId, UtxoToken};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IssuanceError {
    #[error("invalid oracle config: {0}")]
    Config(&'static str),
    #[error("{have} valid approvals, {need} required")]
    Threshold { have: usize, need: usize },
    #[error("zero-amount issuance")]
    ZeroAmount,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleConfig {
    signers: Vec<PublicKey>,
    threshold: usize,
}

impl OracleConfig {
    pub fn new(signers: Vec<PublicKey>, threshold: usize) -> Result<Self, IssuanceError> {
        if threshold == 0 || threshold > signers.len() {
            return Err(IssuanceError::Config(
                "threshold must be between 1 and the signer count",
            ));
        }
        let distinct: BTreeSet<&PublicKey> = signers.iter().collect();
        if distinct.len() != signers.len() {
            return Err(IssuanceError::Config("duplicate signer key"));
        }
        Ok(OracleConfig { signers, threshold })
    }

    pub fn signers(&self) -> &[PublicKey] {
        &self.signers
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    /// One record per configured signer with a valid approval of `message`.
    fn approvers(&self, message: &HashDigest, approvals: &[Signature]) -> Vec<ApprovalRecord> {
        self.signers
            .iter()
            .filter_map(|pk| {
                let sig = approvals
                    .iter()
                    .find(|sig| verify(message.as_bytes(), sig, pk))?;
                Some(ApprovalRecord {
                    signer: pk.fingerprint(),
                    signature_digest: hash(sig.as_bytes()),
                })
            })
            .collect()
    }
}

/// A counted approval: who signed, and a digest of the signature bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApprovalRecord {
    pub signer: String,
    pub signature_digest: HashDigest,
}

impl Canonical for ApprovalRecord {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.bytes(self.signer.as_bytes())
            .nested(&self.signature_digest);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let signer = String::from_utf8(dec.bytes()?.to_vec())
            .map_err(|_| DecodeError::invalid("signer", "not utf-8"))?;
        Ok(ApprovalRecord {
            signer,
            signature_digest: dec.nested()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssuanceKind {
    Mint,
    Redeem,
}

/// What the oracle signers approve. The sequence number ties an approval to
/// one slot in the audit trail so it cannot be replayed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IssuanceRequest {
    Mint {
        sequence: u64,
        fiat_amount: Amount,
        recipient: PublicKey,
    },
    Redeem {
        sequence: u64,
        token_ids: Vec<TokenId>,
    },
}

impl IssuanceRequest {
    pub fn message(&self) -> HashDigest {
        match self {
            IssuanceRequest::Mint {
                sequence,
                fiat_amount,
                recipient,
            } => hash_fields("qrpl/issuance-mint", |e| {
                e.u64(*sequence).u64(*fiat_amount).nested(recipient);
            }),
            IssuanceRequest::Redeem {
                sequence,
                token_ids,
            } => hash_fields("qrpl/issuance-redeem", |e| {
                e.u64(*sequence).list(token_ids);
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MintEvent {
    pub sequence: u64,
    pub kind: IssuanceKind,
    pub fiat_amount: Amount,
    /// Tokens created (mint) or destroyed (redeem); always equal to
    /// `fiat_amount`.
    pub tokens_minted: Amount,
    pub token_ids: Vec<TokenId>,
    /// Approvals counted toward the threshold, one per distinct signer.
    pub approvals: Vec<ApprovalRecord>,
    pub height: Height,
    pub prev_digest: HashDigest,
    pub event_id: HashDigest,
}

fn event_digest(e: &MintEvent) -> HashDigest {
    hash_fields("qrpl/issuance-event", |enc| {
        enc.u64(e.sequence)
            .u8(e.kind as u8)
            .u64(e.fiat_amount)
            .u64(e.tokens_minted)
            .list(&e.token_ids)
            .list(&e.approvals)
            .u64(e.height)
            .nested(&e.prev_digest);
    })
}

/// Append-only, hash-chained list of issuance events.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AuditTrail {
    events: Vec<MintEvent>,
}

impl AuditTrail {
    pub fn events(&self) -> &[MintEvent] {
        &self.events
    }

    pub fn head(&self) -> HashDigest {
        self.events
            .last()
            .map_or(HashDigest::default(), |e| e.event_id)
    }

    /// Recomputes every link. Returns the index of the first bad event.
    pub fn verify_chain(&self) -> Result<(), usize> {
        let mut prev = HashDigest::default();
        for (i, e) in self.events.iter().enumerate() {
            if e.prev_digest != prev || e.sequence != i as u64 || event_digest(e) != e.event_id {
                return Err(i);
            }
            prev = e.event_id;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
            .collect()
    }

    /// Mutable access for tamper tests.
    #[doc(hidden)]
    pub fn events_mut(&mut self) -> &mut Vec<MintEvent> {
        &mut self.events
    }

    fn append(&mut self, mut event: MintEvent) -> MintEvent {
        event.prev_digest = self.head();
        event.event_id = event_digest(&event);
        self.events.push(event.clone());
        event
    }
}

/// The issuing oracle: config plus its audit trail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issuer {
    config: OracleConfig,
    trail: AuditTrail,
}

impl Issuer {
    pub fn new(config: OracleConfig) -> Self {
        Issuer {
            config,
            trail: AuditTrail::default(),
        }
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn trail(&self) -> &AuditTrail {
        &self.trail
    }

    pub fn next_sequence(&self) -> u64 {
        self.trail.events.len() as u64
    }

    pub fn mint_request(&self, fiat_amount: Amount, recipient: &PublicKey) -> IssuanceRequest {
        IssuanceRequest::Mint {
            sequence: self.next_sequence(),
            fiat_amount,
            recipient: recipient.clone(),
        }
    }

    pub fn redeem_request(&self, token_ids: &[TokenId]) -> IssuanceRequest {
        IssuanceRequest::Redeem {
            sequence: self.next_sequence(),
            token_ids: token_ids.to_vec(),
        }
    }

    fn check_threshold(
        &self,
        request: &IssuanceRequest,
        approvals: &[Signature],
    ) -> Result<Vec<ApprovalRecord>, IssuanceError> {
        let counted = self.config.approvers(&request.message(), approvals);
        if counted.len() < self.config.threshold {
            return Err(IssuanceError::Threshold {
                have: counted.len(),
                need: self.config.threshold,
            });
        }
        Ok(counted)
    }

    /// Creates one token of exactly `fiat_amount` owned by `recipient`.
    pub fn mint(
        &mut self,
        ledger: &mut LedgerState,
        fiat_amount: Amount,
        approvals: &[Signature],
        recipient: &PublicKey,
    ) -> Result<(MintEvent, UtxoToken), IssuanceError> {
        if fiat_amount == 0 {
            return Err(IssuanceError::ZeroAmount);
        }
        let request = self.mint_request(fiat_amount, recipient);
        let approvals_counted = self.check_threshold(&request, approvals)?;
        let blinding = hash_fields("qrpl/mint-blinding", |e| {
            e.nested(&request.message());
        });
        let token = UtxoToken::new(
            commit(fiat_amount, &blinding.0),
            fiat_amount,
            recipient.clone(),
            ledger.height(),
        );
        ledger.mint(token.clone())?;
        let event = self.trail.append(MintEvent {
            sequence: self.next_sequence(),
            kind: IssuanceKind::Mint,
            fiat_amount,
            tokens_minted: fiat_amount,
            token_ids: vec![token.token_id],
            approvals: approvals_counted,
            height: ledger.height(),
            prev_digest: HashDigest::default(),
            event_id: HashDigest::default(),
        });
        Ok((event, token))
    }

    /// Burns unspent tokens and pays out their value in fiat.
    pub fn redeem(
        &mut self,
        ledger: &mut LedgerState,
        token_ids: &[TokenId],
        approvals: &[Signature],
    ) -> Result<MintEvent, IssuanceError> {
        if token_ids.is_empty() {
            return Err(IssuanceError::ZeroAmount);
        }
        let request = self.redeem_request(token_ids);
        let approvals_counted = self.check_threshold(&request, approvals)?;
        let burned = ledger.burn(token_ids)?;
        Ok(self.trail.append(MintEvent {
            sequence: self.next_sequence(),
            kind: IssuanceKind::Redeem,
            fiat_amount: burned,
            tokens_minted: burned,
            token_ids: token_ids.to_vec(),
            approvals: approvals_counted,
            height: ledger.height(),
            prev_digest: HashDigest::default(),
            event_id: HashDigest::default(),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{sign, KeyPair, SchemeId};
    use crate::rng::seeded;

    fn oracle(n: usize, t: usize) -> (Issuer, Vec<KeyPair>) {
        let mut rng = seeded(9);
        let keys: Vec<KeyPair> = (0..n)
            .map(|_| KeyPair::generate(SchemeId::Dilithium2, &mut rng))
            .collect();
        let cfg =
            OracleConfig::new(keys.iter().map(|k| k.public_key().clone()).collect(), t).unwrap();
        (Issuer::new(cfg), keys)
    }

    fn approve(req: &IssuanceRequest, keys: &[&KeyPair]) -> Vec<Signature> {
        keys.iter()
            .map(|k| sign(req.message().as_bytes(), k).unwrap())
            .collect()
    }

    #[test]
    fn mint_is_one_to_one() {
        let (mut issuer, keys) = oracle(3, 2);
        let mut ledger = LedgerState::new();
        let owner = KeyPair::generate(SchemeId::Dilithium2, &mut seeded(1));
        let req = issuer.mint_request(100, owner.public_key());
        let (event, token) = issuer
            .mint(
                &mut ledger,
                100,
                &approve(&req, &[&keys[0], &keys[2]]),
                owner.public_key(),
            )
            .unwrap();
        assert_eq!(
            (event.tokens_minted, token.value, ledger.total_supply()),
            (100, 100, 100)
        );
        ledger.audit().unwrap();
    }

    #[test]
    fn threshold_counts_distinct_signers() {
        let (mut issuer, keys) = oracle(3, 2);
        let mut ledger = LedgerState::new();
        let owner = KeyPair::generate(SchemeId::Dilithium2, &mut seeded(1));
        let req = issuer.mint_request(100, owner.public_key());
        let one = approve(&req, &[&keys[1]]);
        assert_eq!(
            issuer.mint(&mut ledger, 100, &one, owner.public_key()),
            Err(IssuanceError::Threshold { have: 1, need: 2 })
        );
        let dup = approve(&req, &[&keys[1], &keys[1]]);
        assert!(matches!(
            issuer.mint(&mut ledger, 100, &dup, owner.public_key()),
            Err(IssuanceError::Threshold { have: 1, .. })
        ));
        assert_eq!(ledger.total_supply(), 0);
    }

    #[test]
    fn approvals_do_not_replay_across_sequence() {
        let (mut issuer, keys) = oracle(2, 1);
        let mut ledger = LedgerState::new();
        let owner = KeyPair::generate(SchemeId::Dilithium2, &mut seeded(1));
        let req = issuer.mint_request(50, owner.public_key());
        let sigs = approve(&req, &[&keys[0]]);
        issuer
            .mint(&mut ledger, 50, &sigs, owner.public_key())
            .unwrap();
        assert!(matches!(
            issuer.mint(&mut ledger, 50, &sigs, owner.public_key()),
            Err(IssuanceError::Threshold { .. })
        ));
    }

    #[test]
    fn zero_mint_and_bad_config_rejected() {
        let (mut issuer, _) = oracle(1, 1);
        let owner = KeyPair::generate(SchemeId::Dilithium2, &mut seeded(1));
        assert_eq!(
            issuer.mint(&mut LedgerState::new(), 0, &[], owner.public_key()),
            Err(IssuanceError::ZeroAmount)
        );
        assert!(OracleConfig::new(vec![owner.public_key().clone()], 2).is_err());
        assert!(OracleConfig::new(vec![owner.public_key().clone()], 0).is_err());
        assert!(OracleConfig::new(vec![owner.public_key().clone(); 2], 1).is_err());
    }

    #[test]
    fn redeem_restores_supply_and_rejects_spent() {
        let (mut issuer, keys) = oracle(1, 1);
        let mut ledger = LedgerState::new();
        let owner = KeyPair::generate(SchemeId::Dilithium2, &mut seeded(1));
        let req = issuer.mint_request(100, owner.public_key());
        let (_, token) = issuer
            .mint(
                &mut ledger,
                100,
                &approve(&req, &[&keys[0]]),
                owner.public_key(),
            )
            .unwrap();
        let req = issuer.redeem_request(&[token.token_id]);
        let ev = issuer
            .redeem(&mut ledger, &[token.token_id], &approve(&req, &[&keys[0]]))
            .unwrap();
        assert_eq!(
            (ev.kind, ev.fiat_amount, ledger.total_supply()),
            (IssuanceKind::Redeem, 100, 0)
        );
        let req = issuer.redeem_request(&[token.token_id]);
        assert_eq!(
            issuer.redeem(&mut ledger, &[token.token_id], &approve(&req, &[&keys[0]])),
            Err(IssuanceError::Ledger(LedgerError::DoubleSpend(
                token.token_id
            )))
        );
        assert_eq!(issuer.trail().verify_chain(), Ok(()));
        ledger.audit().unwrap();
    }

    #[test]
    fn tampering_breaks_chain() {
        let (mut issuer, keys) = oracle(1, 1);
        let mut ledger = LedgerState::new();
        let owner = KeyPair::generate(SchemeId::Dilithium2, &mut seeded(1));
        for amount in [10, 20, 30] {
            let req = issuer.mint_request(amount, owner.public_key());
            issuer
                .mint(
                    &mut ledger,
                    amount,
                    &approve(&req, &[&keys[0]]),
                    owner.public_key(),
                )
                .unwrap();
        }
        let mut trail = issuer.trail().clone();
        assert_eq!(trail.to_jsonl().lines().count(), 3);
        trail.events_mut()[1].fiat_amount = 21;
        assert_eq!(trail.verify_chain(), Err(1));
        let mut trail = issuer.trail().clone();
        trail.events_mut().remove(0);
        assert_eq!(trail.verify_chain(), Err(0));
    }
}

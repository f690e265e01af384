//! Offline device-to-device payments.
//!
//! A sender builds an ordinary transaction on-device, wraps it in a voucher
//! together with the input tokens it spends, and hands it over NFC or QR.
//! Both sides can check proof and signature without the network. Neither
//! side may spend the new outputs until a device reconciles with the ledger,
//! where the first synchronized spend of a token wins.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::crypto::{self, hash, hash_fields, HashDigest, KeyPair, ProverMode};
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder};
use crate::ledger::{
    build_transaction, Amount, FeePolicy, Height, LedgerError, LedgerState, Payment, Transaction,
    UtxoToken, Verdict, MAX_TX_ITEMS, MINOR_PER_MAJOR,
};

/// Per-transaction limit of the lowest tier, in minor units.
pub const BASE_TIER_LIMIT: Amount = 300 * MINOR_PER_MAJOR;
/// Largest QR frame, header included.
pub const QR_FRAME_MAX: usize = 2_900;
pub const QR_HEADER_LEN: usize = 4;
pub const CHECKSUM_LEN: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OfflineError {
    #[error("amount {amount} exceeds tier {level} limit {limit}")]
    TierLimit {
        level: u8,
        amount: Amount,
        limit: Amount,
    },
    #[error("no single held token covers {needed}; largest is {available}")]
    InsufficientFunds { needed: Amount, available: Amount },
    #[error("zero-amount transfer")]
    ZeroAmount,
    #[error("invalid voucher: {0}")]
    InvalidVoucher(&'static str),
    #[error("invalid tier table: {0}")]
    TierTable(&'static str),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("checksum mismatch")]
    Checksum,
    #[error("payload incomplete: {missing} of {total} frames missing")]
    Incomplete { missing: usize, total: usize },
    #[error("bad frame: {0}")]
    BadFrame(&'static str),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KycTier {
    pub level: u8,
    pub per_tx_limit: Amount,
}

impl KycTier {
    /// Level 0 allows 300 major units; each level above multiplies by ten.
    pub fn standard(level: u8) -> Option<KycTier> {
        let limit = 10u64
            .checked_pow(u32::from(level))
            .and_then(|m| m.checked_mul(BASE_TIER_LIMIT))?;
        Some(KycTier {
            level,
            per_tx_limit: limit,
        })
    }
}

impl Default for KycTier {
    fn default() -> Self {
        KycTier {
            level: 0,
            per_tx_limit: BASE_TIER_LIMIT,
        }
    }
}

impl Canonical for KycTier {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.u8(self.level).u64(self.per_tx_limit);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(KycTier {
            level: dec.u8()?,
            per_tx_limit: dec.u64()?,
        })
    }
}

/// Limits by level, as configured by the operator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TierTable {
    limits: Vec<Amount>,
}

impl TierTable {
    pub fn new(limits: Vec<Amount>) -> Result<Self, OfflineError> {
        if limits.first() != Some(&BASE_TIER_LIMIT) {
            return Err(OfflineError::TierTable(
                "level 0 limit must be 300 major units",
            ));
        }
        if limits.windows(2).any(|w| w[1] < w[0]) {
            return Err(OfflineError::TierTable(
                "limits must not decrease with level",
            ));
        }
        if limits.len() > usize::from(u8::MAX) + 1 {
            return Err(OfflineError::TierTable("too many levels"));
        }
        Ok(TierTable { limits })
    }

    pub fn tier(&self, level: u8) -> Option<KycTier> {
        self.limits
            .get(usize::from(level))
            .map(|&per_tx_limit| KycTier {
                level,
                per_tx_limit,
            })
    }

    /// True when `tier` matches the table and `amount` is within its limit.
    pub fn permits(&self, tier: &KycTier, amount: Amount) -> bool {
        self.tier(tier.level) == Some(*tier) && amount <= tier.per_tx_limit
    }
}

impl Default for TierTable {
    fn default() -> Self {
        TierTable {
            limits: (0..4)
                .filter_map(KycTier::standard)
                .map(|t| t.per_tx_limit)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfflineVoucher {
    pub voucher_id: HashDigest,
    /// Full tokens consumed by `tx`, so the voucher can be checked offline.
    pub inputs: Vec<UtxoToken>,
    pub tx: Transaction,
    pub tier: KycTier,
    pub created_at: u64,
}

fn voucher_id_for(
    inputs: &[UtxoToken],
    tx: &Transaction,
    tier: &KycTier,
    created_at: u64,
) -> HashDigest {
    hash_fields("qrpl/voucher", |e| {
        e.list(inputs).nested(tx).nested(tier).u64(created_at);
    })
}

impl OfflineVoucher {
    pub fn new(inputs: Vec<UtxoToken>, tx: Transaction, tier: KycTier, created_at: u64) -> Self {
        let voucher_id = voucher_id_for(&inputs, &tx, &tier, created_at);
        OfflineVoucher {
            voucher_id,
            inputs,
            tx,
            tier,
            created_at,
        }
    }

    /// Value paid to the recipient, carried by the first output.
    pub fn amount(&self) -> Amount {
        self.tx.outputs.first().map_or(0, |o| o.value)
    }
}

impl Canonical for OfflineVoucher {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.nested(&self.voucher_id)
            .list(&self.inputs)
            .nested(&self.tx)
            .nested(&self.tier)
            .u64(self.created_at);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let voucher_id = dec.nested()?;
        let inputs = dec.list(MAX_TX_ITEMS)?;
        let tx = dec.nested()?;
        let tier = dec.nested()?;
        let created_at = dec.u64()?;
        let v = OfflineVoucher::new(inputs, tx, tier, created_at);
        if v.voucher_id != voucher_id {
            return Err(DecodeError::invalid(
                "voucher_id",
                "does not match voucher contents",
            ));
        }
        Ok(v)
    }
}

/// On-device check: self-consistent inputs, one owner, conservation, tier
/// limit, proof and signature.
pub fn validate_voucher(v: &OfflineVoucher) -> Result<(), OfflineError> {
    let tx = &v.tx;
    if v.inputs.is_empty() || tx.outputs.is_empty() || !tx.hash_is_consistent() {
        return Err(OfflineError::InvalidVoucher("malformed transaction"));
    }
    let ids_match = v.inputs.len() == tx.inputs.len()
        && v.inputs
            .iter()
            .zip(&tx.inputs)
            .all(|(t, id)| t.token_id == *id && t.is_consistent());
    if !ids_match {
        return Err(OfflineError::InvalidVoucher(
            "inputs do not match transaction",
        ));
    }
    let owner = &v.inputs[0].owner_epk;
    if v.inputs.iter().any(|t| t.owner_epk != *owner) {
        return Err(OfflineError::InvalidVoucher("inputs have different owners"));
    }
    if v.amount() == 0 {
        return Err(OfflineError::ZeroAmount);
    }
    if v.amount() > v.tier.per_tx_limit {
        return Err(OfflineError::TierLimit {
            level: v.tier.level,
            amount: v.amount(),
            limit: v.tier.per_tx_limit,
        });
    }
    let total_in = v
        .inputs
        .iter()
        .try_fold(0u64, |a, t| a.checked_add(t.value));
    let total_out = tx.output_total().and_then(|o| o.checked_add(tx.fee));
    if total_in.is_none() || total_in != total_out {
        return Err(OfflineError::InvalidVoucher("value imbalance"));
    }
    if !crypto::verify_proof(&tx.statement(), &tx.zk_proof) {
        return Err(OfflineError::InvalidVoucher("proof does not verify"));
    }
    if !crypto::verify(tx.tx_hash.as_bytes(), &tx.signature, owner) {
        return Err(OfflineError::InvalidVoucher("signature does not verify"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentVoucher {
    pub voucher: OfflineVoucher,
    pub spent: (UtxoToken, KeyPair),
    pub change_key: Option<KeyPair>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceivedVoucher {
    pub voucher: OfflineVoucher,
    pub key: KeyPair,
}

/// Wallet state of one device. Cloning it models a cloned device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceState {
    pub device_id: HashDigest,
    pub owner: KeyPair,
    pub fee_policy: FeePolicy,
    pub held: Vec<(UtxoToken, KeyPair)>,
    pub outbox: Vec<SentVoucher>,
    pub inbox: Vec<ReceivedVoucher>,
    pub synced_height: Height,
    /// Device-local clock, advanced once per voucher.
    pub clock: u64,
}

impl DeviceState {
    pub fn new(label: &str, owner: KeyPair) -> Self {
        DeviceState {
            device_id: hash(label.as_bytes()),
            owner,
            fee_policy: FeePolicy::default(),
            held: Vec::new(),
            outbox: Vec::new(),
            inbox: Vec::new(),
            synced_height: 0,
            clock: 0,
        }
    }

    pub fn spendable(&self) -> Amount {
        self.held.iter().map(|(t, _)| t.value).sum()
    }
}

/// Pays `amount` from one held token of `sender` to `recipient`.
///
/// The smallest token covering amount and fee is spent; change returns to
/// the sender once synced. Both devices are left unchanged on error.
pub fn offline_transfer(
    sender: &mut DeviceState,
    recipient: &mut DeviceState,
    amount: Amount,
    tier: KycTier,
    rng: &mut impl Rng,
) -> Result<OfflineVoucher, OfflineError> {
    if amount == 0 {
        return Err(OfflineError::ZeroAmount);
    }
    if amount > tier.per_tx_limit {
        return Err(OfflineError::TierLimit {
            level: tier.level,
            amount,
            limit: tier.per_tx_limit,
        });
    }
    let fee = sender.fee_policy.fee_for(amount);
    let needed = amount.checked_add(fee).ok_or(LedgerError::Overflow)?;
    let index = sender
        .held
        .iter()
        .enumerate()
        .filter(|(_, (t, _))| t.value >= needed)
        .min_by_key(|(_, (t, _))| t.value)
        .map(|(i, _)| i)
        .ok_or(OfflineError::InsufficientFunds {
            needed,
            available: sender.held.iter().map(|(t, _)| t.value).max().unwrap_or(0),
        })?;
    let (token, key) = sender.held[index].clone();
    let change = token.value - needed;
    let mut payments = vec![Payment::new(recipient.owner.public_key(), amount)];
    if change > 0 {
        payments.push(Payment::new(sender.owner.public_key(), change));
    }
    let prepared = build_transaction(
        std::slice::from_ref(&token),
        &key,
        &payments,
        fee,
        sender.synced_height,
        ProverMode::Honest,
        rng,
    )?;
    let voucher = OfflineVoucher::new(vec![token], prepared.tx, tier, sender.clock);
    validate_voucher(&voucher)?;

    let mut keys = prepared.output_keys.into_iter();
    let recipient_key = keys.next().expect("one key per output");
    let spent = sender.held.remove(index);
    sender.clock += 1;
    sender.outbox.push(SentVoucher {
        voucher: voucher.clone(),
        spent,
        change_key: keys.next(),
    });
    recipient.clock += 1;
    recipient.inbox.push(ReceivedVoucher {
        voucher: voucher.clone(),
        key: recipient_key,
    });
    Ok(voucher)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    Nfc,
    Qr,
}

fn checksum(data: &[u8]) -> [u8; CHECKSUM_LEN] {
    let d = hash(data);
    d.0[..CHECKSUM_LEN].try_into().expect("4 bytes")
}

/// Canonical encoding followed by a 4-byte checksum.
pub fn voucher_payload(v: &OfflineVoucher) -> Vec<u8> {
    let mut bytes = v.to_canonical_bytes();
    let sum = checksum(&bytes);
    bytes.extend_from_slice(&sum);
    bytes
}

/// Splits the payload into transport frames: one for NFC, or QR frames of
/// at most [`QR_FRAME_MAX`] bytes with a big-endian index and total header.
pub fn encode_voucher(v: &OfflineVoucher, transport: Transport) -> Vec<Vec<u8>> {
    let payload = voucher_payload(v);
    match transport {
        Transport::Nfc => vec![payload],
        Transport::Qr => {
            let chunks: Vec<&[u8]> = payload.chunks(QR_FRAME_MAX - QR_HEADER_LEN).collect();
            let total = u16::try_from(chunks.len()).expect("payload fits in u16::MAX frames");
            chunks
                .iter()
                .enumerate()
                .map(|(i, chunk)| {
                    let mut frame = Vec::with_capacity(QR_HEADER_LEN + chunk.len());
                    frame.extend_from_slice(&(i as u16).to_be_bytes());
                    frame.extend_from_slice(&total.to_be_bytes());
                    frame.extend_from_slice(chunk);
                    frame
                })
                .collect()
        }
    }
}

/// Orders QR frames by index and joins their bodies. Frames may arrive in
/// any order and repeat, but repeats must be identical.
pub fn reassemble_qr(frames: &[Vec<u8>]) -> Result<Vec<u8>, TransportError> {
    let mut total: Option<usize> = None;
    let mut slots: Vec<Option<&[u8]>> = Vec::new();
    for frame in frames {
        if frame.len() <= QR_HEADER_LEN || frame.len() > QR_FRAME_MAX {
            return Err(TransportError::BadFrame("frame size out of range"));
        }
        let index = usize::from(u16::from_be_bytes([frame[0], frame[1]]));
        let t = usize::from(u16::from_be_bytes([frame[2], frame[3]]));
        match total {
            None => {
                if t == 0 {
                    return Err(TransportError::BadFrame("zero frame total"));
                }
                total = Some(t);
                slots = vec![None; t];
            }
            Some(prev) if prev != t => {
                return Err(TransportError::BadFrame("inconsistent frame totals"))
            }
            Some(_) => {}
        }
        let body = &frame[QR_HEADER_LEN..];
        let slot = slots
            .get_mut(index)
            .ok_or(TransportError::BadFrame("frame index past total"))?;
        match slot {
            Some(existing) if *existing != body => {
                return Err(TransportError::BadFrame("conflicting duplicate frame"))
            }
            _ => *slot = Some(body),
        }
    }
    let total = total.ok_or(TransportError::Incomplete {
        missing: 1,
        total: 1,
    })?;
    let missing = slots.iter().filter(|s| s.is_none()).count();
    if missing > 0 {
        return Err(TransportError::Incomplete { missing, total });
    }
    Ok(slots.into_iter().flatten().flatten().copied().collect())
}

/// Checks the checksum trailer and decodes the voucher.
pub fn decode_payload(payload: &[u8]) -> Result<OfflineVoucher, TransportError> {
    if payload.len() < CHECKSUM_LEN {
        return Err(TransportError::Checksum);
    }
    let (body, sum) = payload.split_at(payload.len() - CHECKSUM_LEN);
    if checksum(body) != sum {
        return Err(TransportError::Checksum);
    }
    Ok(OfflineVoucher::from_canonical_bytes(body)?)
}

pub fn decode_voucher(
    transport: Transport,
    frames: &[Vec<u8>],
) -> Result<OfflineVoucher, TransportError> {
    match transport {
        Transport::Nfc => match frames {
            [payload] => decode_payload(payload),
            [] => Err(TransportError::Incomplete {
                missing: 1,
                total: 1,
            }),
            _ => Err(TransportError::BadFrame(
                "NFC payload must be a single frame",
            )),
        },
        Transport::Qr => decode_payload(&reassemble_qr(frames)?),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    OverTierLimit,
    Ledger(Verdict),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub voucher_id: HashDigest,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReconcileReport {
    /// Vouchers this device submitted and the ledger accepted.
    pub applied: Vec<HashDigest>,
    /// Vouchers already on the ledger, submitted earlier by the counterparty.
    pub already_applied: Vec<HashDigest>,
    pub conflicts: Vec<Conflict>,
    pub synced_height: Height,
}

fn already_on_ledger(ledger: &LedgerState, tx: &Transaction) -> bool {
    tx.outputs.iter().all(|o| {
        ledger.get_unspent(&o.token_id).is_some() || ledger.spent_log().contains_key(&o.token_id)
    })
}

/// Submits the device's pending vouchers in creation order, then replaces
/// its holdings with what the ledger says it owns.
pub fn reconcile(
    device: &mut DeviceState,
    ledger: &mut LedgerState,
    tiers: &TierTable,
) -> ReconcileReport {
    #[derive(Clone, Copy)]
    enum Side {
        Sent(usize),
        Received(usize),
    }
    let mut order: Vec<(u64, HashDigest, Side)> = device
        .outbox
        .iter()
        .enumerate()
        .map(|(i, s)| (s.voucher.created_at, s.voucher.voucher_id, Side::Sent(i)))
        .chain(device.inbox.iter().enumerate().map(|(i, r)| {
            (
                r.voucher.created_at,
                r.voucher.voucher_id,
                Side::Received(i),
            )
        }))
        .collect();
    order.sort_by_key(|(t, id, _)| (*t, *id));

    let mut report = ReconcileReport::default();
    for (_, id, side) in &order {
        let voucher = match side {
            Side::Sent(i) => &device.outbox[*i].voucher,
            Side::Received(i) => &device.inbox[*i].voucher,
        };
        if !tiers.permits(&voucher.tier, voucher.amount()) {
            report.conflicts.push(Conflict {
                voucher_id: *id,
                reason: RejectReason::OverTierLimit,
            });
            continue;
        }
        if already_on_ledger(ledger, &voucher.tx) {
            report.already_applied.push(*id);
            continue;
        }
        match ledger.validate_transaction(&voucher.tx) {
            Verdict::Accept => {
                ledger
                    .apply_transaction(&voucher.tx)
                    .expect("validated transaction applies");
                report.applied.push(*id);
            }
            verdict => report.conflicts.push(Conflict {
                voucher_id: *id,
                reason: RejectReason::Ledger(verdict),
            }),
        }
    }

    let mut held = std::mem::take(&mut device.held);
    for sent in device.outbox.drain(..) {
        held.push(sent.spent);
        if let (Some(change), Some(key)) = (sent.voucher.tx.outputs.get(1), sent.change_key) {
            held.push((change.clone(), key));
        }
    }
    for received in device.inbox.drain(..) {
        if let Some(out) = received.voucher.tx.outputs.first() {
            held.push((out.clone(), received.key));
        }
    }
    held.retain(|(t, _)| ledger.get_unspent(&t.token_id) == Some(t));
    held.sort_by_key(|(t, _)| t.token_id);
    held.dedup_by_key(|(t, _)| t.token_id);
    device.held = held;
    device.synced_height = ledger.height();
    report.synced_height = device.synced_height;
    report
}

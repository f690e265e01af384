//! Snapshot export and import: canonical binary plus a JSON dump for humans.

use std::collections::BTreeMap;

use serde::Serialize;

use super::state::{LedgerState, SupplyFlows};
use super::transaction::UtxoToken;
use super::{Amount, Height, TokenId};
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder};

const SNAPSHOT_VERSION: u8 = 1;
const MAX_SNAPSHOT_ITEMS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct SpentEntry {
    token_id: TokenId,
    spent_at: Height,
}

impl Canonical for SpentEntry {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.nested(&self.token_id).u64(self.spent_at);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(SpentEntry {
            token_id: dec.nested()?,
            spent_at: dec.u64()?,
        })
    }
}

impl Canonical for SupplyFlows {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.u64(self.minted)
            .u64(self.redeemed)
            .u64(self.fees_burned)
            .u64(self.swapped_in)
            .u64(self.swapped_out);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(SupplyFlows {
            minted: dec.u64()?,
            redeemed: dec.u64()?,
            fees_burned: dec.u64()?,
            swapped_in: dec.u64()?,
            swapped_out: dec.u64()?,
        })
    }
}

fn strictly_sorted<K: Ord, T>(items: &[T], key: impl Fn(&T) -> &K) -> bool {
    items.windows(2).all(|w| key(&w[0]) < key(&w[1]))
}

impl Canonical for LedgerState {
    fn encode_fields(&self, enc: &mut Encoder) {
        let unspent: Vec<UtxoToken> = self.unspent.values().cloned().collect();
        let spent: Vec<SpentEntry> = self
            .spent_log
            .iter()
            .map(|(id, h)| SpentEntry {
                token_id: *id,
                spent_at: *h,
            })
            .collect();
        let locked: Vec<UtxoToken> = self.locked.values().cloned().collect();
        enc.u8(SNAPSHOT_VERSION)
            .u64(self.height)
            .u64(self.total_supply)
            .nested(&self.flows)
            .list(&unspent)
            .list(&spent)
            .list(&locked);
    }

    /// Rejects anything that is not the unique canonical encoding of a state
    /// passing a full audit.
    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let version = dec.u8()?;
        if version != SNAPSHOT_VERSION {
            return Err(DecodeError::invalid("version", version.to_string()));
        }
        let height = dec.u64()?;
        let total_supply = dec.u64()?;
        let flows: SupplyFlows = dec.nested()?;
        let unspent: Vec<UtxoToken> = dec.list(MAX_SNAPSHOT_ITEMS)?;
        let spent: Vec<SpentEntry> = dec.list(MAX_SNAPSHOT_ITEMS)?;
        let locked: Vec<UtxoToken> = dec.list(MAX_SNAPSHOT_ITEMS)?;
        if !strictly_sorted(&unspent, |t| &t.token_id)
            || !strictly_sorted(&spent, |s| &s.token_id)
            || !strictly_sorted(&locked, |t| &t.token_id)
        {
            return Err(DecodeError::invalid(
                "snapshot",
                "entries not in canonical order",
            ));
        }
        if spent.iter().any(|s| s.spent_at > height) {
            return Err(DecodeError::invalid(
                "snapshot",
                "spend recorded above current height",
            ));
        }
        let state = LedgerState {
            unspent: unspent.into_iter().map(|t| (t.token_id, t)).collect(),
            spent_log: spent
                .into_iter()
                .map(|s| (s.token_id, s.spent_at))
                .collect(),
            locked: locked.into_iter().map(|t| (t.token_id, t)).collect(),
            height,
            total_supply,
            flows,
        };
        state
            .audit()
            .map_err(|e| DecodeError::invalid("snapshot", e.to_string()))?;
        Ok(state)
    }
}

#[derive(Debug, Serialize)]
pub struct TokenDump {
    pub token_id: TokenId,
    pub value: Amount,
    pub commitment: String,
    pub owner_scheme: crate::crypto::SchemeId,
    pub owner_fingerprint: String,
    pub created_at: Height,
}

#[derive(Debug, Serialize)]
pub struct LedgerDump {
    pub height: Height,
    pub total_supply: Amount,
    pub flows: SupplyFlows,
    pub unspent: Vec<TokenDump>,
    pub spent_log: BTreeMap<String, Height>,
    pub locked: Vec<TokenDump>,
}

fn dump_token(t: &UtxoToken) -> TokenDump {
    TokenDump {
        token_id: t.token_id,
        value: t.value,
        commitment: t.commitment.digest.to_hex(),
        owner_scheme: t.owner_epk.scheme(),
        owner_fingerprint: t.owner_epk.fingerprint(),
        created_at: t.created_at,
    }
}

impl LedgerState {
    pub fn export_snapshot(&self) -> Vec<u8> {
        self.to_canonical_bytes()
    }

    pub fn import_snapshot(bytes: &[u8]) -> Result<Self, DecodeError> {
        LedgerState::from_canonical_bytes(bytes)
    }

    pub fn dump(&self) -> LedgerDump {
        LedgerDump {
            height: self.height,
            total_supply: self.total_supply,
            flows: self.flows,
            unspent: self.unspent.values().map(dump_token).collect(),
            spent_log: self
                .spent_log
                .iter()
                .map(|(id, h)| (id.to_hex(), *h))
                .collect(),
            locked: self.locked.values().map(dump_token).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.dump()).expect("ledger dump serializes")
    }
}

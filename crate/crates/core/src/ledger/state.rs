use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::transaction::{build_transaction, Payment, PreparedTransaction, Transaction, UtxoToken};
use super::{Amount, Height, LedgerError, TokenId, Verdict};
use crate::crypto::{self, KeyPair, ProverMode};
use crate::fraction::Fraction;

/// Blocks in one year of 10-second blocks.
pub const ONE_YEAR_OF_BLOCKS: u64 = 365 * 24 * 3600 / 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PruningConfig {
    pub challenge_period_blocks: u64,
}

impl PruningConfig {
    pub fn new(challenge_period_blocks: u64) -> Result<Self, LedgerError> {
        if challenge_period_blocks == 0 {
            return Err(LedgerError::Malformed("challenge period must be positive"));
        }
        Ok(PruningConfig {
            challenge_period_blocks,
        })
    }

    /// One year of blocks at the given block time.
    pub fn one_year(block_time_s: u64) -> Result<Self, LedgerError> {
        if block_time_s == 0 {
            return Err(LedgerError::Malformed("block time must be positive"));
        }
        PruningConfig::new(365 * 24 * 3600 / block_time_s)
    }
}

impl Default for PruningConfig {
    fn default() -> Self {
        PruningConfig {
            challenge_period_blocks: ONE_YEAR_OF_BLOCKS,
        }
    }
}

/// Flat fee as a fraction of the transferred amount, rounded down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FeePolicy {
    pub rate: Fraction,
}

impl Default for FeePolicy {
    fn default() -> Self {
        FeePolicy {
            rate: Fraction::new(1, 10_000).expect("nonzero denominator"),
        }
    }
}

impl FeePolicy {
    pub fn fee_for(&self, amount: Amount) -> Amount {
        let fee = (Fraction::from(amount) * self.rate).floor();
        Amount::try_from(fee.max(0)).unwrap_or(Amount::MAX)
    }
}

/// Cumulative supply movements, kept so conservation can be audited locally.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SupplyFlows {
    pub minted: Amount,
    pub redeemed: Amount,
    pub fees_burned: Amount,
    pub swapped_in: Amount,
    pub swapped_out: Amount,
}

impl SupplyFlows {
    /// Supply implied by the flows alone.
    pub fn implied_supply(&self) -> Option<Amount> {
        self.minted
            .checked_add(self.swapped_in)?
            .checked_sub(self.redeemed)?
            .checked_sub(self.fees_burned)?
            .checked_sub(self.swapped_out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LedgerState {
    pub(crate) unspent: BTreeMap<TokenId, UtxoToken>,
    pub(crate) spent_log: BTreeMap<TokenId, Height>,
    pub(crate) locked: BTreeMap<TokenId, UtxoToken>,
    pub(crate) height: Height,
    pub(crate) total_supply: Amount,
    pub(crate) flows: SupplyFlows,
}

impl LedgerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn height(&self) -> Height {
        self.height
    }

    pub fn total_supply(&self) -> Amount {
        self.total_supply
    }

    pub fn flows(&self) -> SupplyFlows {
        self.flows
    }

    pub fn unspent(&self) -> &BTreeMap<TokenId, UtxoToken> {
        &self.unspent
    }

    pub fn spent_log(&self) -> &BTreeMap<TokenId, Height> {
        &self.spent_log
    }

    pub fn locked(&self) -> &BTreeMap<TokenId, UtxoToken> {
        &self.locked
    }

    pub fn get_unspent(&self, id: &TokenId) -> Option<&UtxoToken> {
        self.unspent.get(id)
    }

    pub fn unspent_value(&self) -> Amount {
        self.unspent.values().map(|t| t.value).sum()
    }

    pub fn locked_value(&self) -> Amount {
        self.locked.values().map(|t| t.value).sum()
    }

    pub fn advance_height(&mut self) -> Height {
        self.height += 1;
        self.height
    }

    fn is_known(&self, id: &TokenId) -> bool {
        self.unspent.contains_key(id)
            || self.spent_log.contains_key(id)
            || self.locked.contains_key(id)
    }

    /// Value recount: supply equals held plus locked value, and equals what
    /// the recorded flows imply. Linear in the token count, no hashing.
    pub fn audit_supply(&self) -> Result<(), LedgerError> {
        let held = self.unspent_value() + self.locked_value();
        if held != self.total_supply {
            return Err(LedgerError::AuditFailed(format!(
                "supply {} != held {}",
                self.total_supply, held
            )));
        }
        if self.flows.implied_supply() != Some(self.total_supply) {
            return Err(LedgerError::AuditFailed(format!(
                "supply {} != flows {:?}",
                self.total_supply, self.flows
            )));
        }
        Ok(())
    }

    /// Full recount: set disjointness, token consistency, then
    /// [`audit_supply`](Self::audit_supply).
    pub fn audit(&self) -> Result<(), LedgerError> {
        let overlap = self
            .unspent
            .keys()
            .chain(self.locked.keys())
            .any(|id| self.spent_log.contains_key(id))
            || self.unspent.keys().any(|id| self.locked.contains_key(id));
        if overlap {
            return Err(LedgerError::AuditFailed(
                "unspent, locked and spent sets overlap".into(),
            ));
        }
        if let Some(t) = self
            .unspent
            .iter()
            .chain(&self.locked)
            .find(|(id, t)| **id != t.token_id || !t.is_consistent())
        {
            return Err(LedgerError::AuditFailed(format!(
                "inconsistent token {}",
                t.0
            )));
        }
        self.audit_supply()
    }

    pub fn create_transaction(
        &self,
        sender: &KeyPair,
        input_ids: &[TokenId],
        payments: &[Payment],
        fee: Amount,
        rng: &mut impl rand::Rng,
    ) -> Result<PreparedTransaction, LedgerError> {
        let mut seen = BTreeSet::new();
        let mut tokens = Vec::with_capacity(input_ids.len());
        for id in input_ids {
            if !seen.insert(*id) {
                return Err(LedgerError::UnknownInput(*id));
            }
            let token = self.unspent.get(id).ok_or(LedgerError::UnknownInput(*id))?;
            tokens.push(token.clone());
        }
        build_transaction(
            &tokens,
            sender,
            payments,
            fee,
            self.height,
            ProverMode::Honest,
            rng,
        )
    }

    pub fn validate_transaction(&self, tx: &Transaction) -> Verdict {
        if tx.inputs.is_empty() || tx.outputs.is_empty() || !tx.hash_is_consistent() {
            return Verdict::Malformed;
        }
        let mut seen = BTreeSet::new();
        let mut total_in: Amount = 0;
        for id in &tx.inputs {
            if !seen.insert(*id) || self.spent_log.contains_key(id) || self.locked.contains_key(id)
            {
                return Verdict::DoubleSpend;
            }
            match self.unspent.get(id) {
                Some(tok) => match total_in.checked_add(tok.value) {
                    Some(v) => total_in = v,
                    None => return Verdict::Malformed,
                },
                None => return Verdict::UnknownInput,
            }
        }
        let mut out_ids = BTreeSet::new();
        for out in &tx.outputs {
            if !out.is_consistent() || self.is_known(&out.token_id) || !out_ids.insert(out.token_id)
            {
                return Verdict::Malformed;
            }
        }
        let total_out = tx.output_total().and_then(|v| v.checked_add(tx.fee));
        if total_out != Some(total_in) {
            return Verdict::Imbalance;
        }
        if !crypto::verify_proof(&tx.statement(), &tx.zk_proof) {
            return Verdict::BadProof;
        }
        let owner = &self.unspent[&tx.inputs[0]].owner_epk;
        let single_owner = tx
            .inputs
            .iter()
            .all(|id| self.unspent[id].owner_epk == *owner);
        if !single_owner || !crypto::verify(tx.tx_hash.as_bytes(), &tx.signature, owner) {
            return Verdict::BadSignature;
        }
        Verdict::Accept
    }

    /// Applies an accepted transaction. Inputs move to the spent log at the
    /// current height; the fee leaves circulating supply.
    pub fn apply_transaction(&mut self, tx: &Transaction) -> Result<(), LedgerError> {
        let verdict = self.validate_transaction(tx);
        if verdict != Verdict::Accept {
            return Err(LedgerError::ProtocolViolation(verdict));
        }
        for id in &tx.inputs {
            self.unspent.remove(id);
            self.spent_log.insert(*id, self.height);
        }
        for out in &tx.outputs {
            self.unspent.insert(out.token_id, out.clone());
        }
        self.total_supply -= tx.fee;
        self.flows.fees_burned += tx.fee;
        Ok(())
    }

    /// Drops spent-log entries older than the challenge period. Returns how
    /// many were discarded.
    pub fn prune(&mut self, config: &PruningConfig) -> usize {
        let before = self.spent_log.len();
        let height = self.height;
        self.spent_log.retain(|_, spent_at| {
            height.saturating_sub(*spent_at) <= config.challenge_period_blocks
        });
        before - self.spent_log.len()
    }

    /// Inserts a freshly issued token and grows supply.
    pub fn mint(&mut self, token: UtxoToken) -> Result<(), LedgerError> {
        self.insert_new(token, |f, v| f.minted += v)
    }

    /// Inserts a token arriving from another shard.
    pub fn mint_swapped_in(&mut self, token: UtxoToken) -> Result<(), LedgerError> {
        self.insert_new(token, |f, v| f.swapped_in += v)
    }

    fn insert_new(
        &mut self,
        token: UtxoToken,
        record: impl FnOnce(&mut SupplyFlows, Amount),
    ) -> Result<(), LedgerError> {
        if !token.is_consistent() {
            return Err(LedgerError::Malformed("inconsistent token"));
        }
        if self.is_known(&token.token_id) {
            return Err(LedgerError::DuplicateToken(token.token_id));
        }
        self.total_supply = self
            .total_supply
            .checked_add(token.value)
            .ok_or(LedgerError::Overflow)?;
        record(&mut self.flows, token.value);
        self.unspent.insert(token.token_id, token);
        Ok(())
    }

    fn spent_error(&self, id: &TokenId) -> LedgerError {
        if self.spent_log.contains_key(id) || self.locked.contains_key(id) {
            LedgerError::DoubleSpend(*id)
        } else {
            LedgerError::UnknownInput(*id)
        }
    }

    /// Removes unspent tokens from circulation for redemption.
    pub fn burn(&mut self, ids: &[TokenId]) -> Result<Amount, LedgerError> {
        let mut seen = BTreeSet::new();
        for id in ids {
            if !seen.insert(*id) {
                return Err(LedgerError::DoubleSpend(*id));
            }
            if !self.unspent.contains_key(id) {
                return Err(self.spent_error(id));
            }
        }
        let mut total: Amount = 0;
        for id in ids {
            let tok = self.unspent.remove(id).expect("checked above");
            self.spent_log.insert(*id, self.height);
            total += tok.value;
        }
        self.total_supply -= total;
        self.flows.redeemed += total;
        Ok(total)
    }

    /// Moves an unspent token into the swap-locked set.
    pub fn lock(&mut self, id: &TokenId) -> Result<UtxoToken, LedgerError> {
        let token = self
            .unspent
            .remove(id)
            .ok_or_else(|| self.spent_error(id))?;
        self.locked.insert(*id, token.clone());
        Ok(token)
    }

    /// Returns a locked token to the spendable set.
    pub fn unlock(&mut self, id: &TokenId) -> Result<UtxoToken, LedgerError> {
        let token = self
            .locked
            .remove(id)
            .ok_or(LedgerError::UnknownInput(*id))?;
        self.unspent.insert(*id, token.clone());
        Ok(token)
    }

    /// Destroys a locked token whose value has moved to another shard.
    pub fn burn_locked(&mut self, id: &TokenId) -> Result<UtxoToken, LedgerError> {
        let token = self
            .locked
            .remove(id)
            .ok_or(LedgerError::UnknownInput(*id))?;
        self.spent_log.insert(*id, self.height);
        self.total_supply -= token.value;
        self.flows.swapped_out += token.value;
        Ok(token)
    }
}

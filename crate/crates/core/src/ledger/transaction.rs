use rand::Rng;

use super::{Amount, Height, LedgerError, TokenId};
use crate::crypto::{
    self, commit, derive_ephemeral_with_nonce, hash_fields, open, Blinding, Commitment, HashDigest,
    KeyPair, ProofArtifact, ProverMode, PublicKey, Signature, Statement,
};
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder};

/// Upper bound on inputs or outputs accepted from the wire.
pub const MAX_TX_ITEMS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtxoToken {
    pub token_id: TokenId,
    pub commitment: Commitment,
    pub value: Amount,
    pub owner_epk: PublicKey,
    pub created_at: Height,
}

fn token_id_for(
    commitment: &Commitment,
    value: Amount,
    owner: &PublicKey,
    created_at: Height,
) -> TokenId {
    hash_fields("qrpl/token", |e| {
        e.nested(commitment)
            .u64(value)
            .nested(owner)
            .u64(created_at);
    })
}

impl UtxoToken {
    pub fn new(
        commitment: Commitment,
        value: Amount,
        owner_epk: PublicKey,
        created_at: Height,
    ) -> Self {
        let token_id = token_id_for(&commitment, value, &owner_epk, created_at);
        UtxoToken {
            token_id,
            commitment,
            value,
            owner_epk,
            created_at,
        }
    }

    /// A token whose blinding is derived from the owner key.
    pub fn for_owner(owner: &KeyPair, value: Amount, created_at: Height) -> Self {
        let blinding = blinding_for(owner);
        UtxoToken::new(
            commit(value, &blinding),
            value,
            owner.public_key().clone(),
            created_at,
        )
    }

    pub fn is_consistent(&self) -> bool {
        self.token_id
            == token_id_for(
                &self.commitment,
                self.value,
                &self.owner_epk,
                self.created_at,
            )
    }
}

impl Canonical for UtxoToken {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.nested(&self.token_id)
            .nested(&self.commitment)
            .u64(self.value)
            .nested(&self.owner_epk)
            .u64(self.created_at);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let token = UtxoToken {
            token_id: dec.nested()?,
            commitment: dec.nested()?,
            value: dec.u64()?,
            owner_epk: dec.nested()?,
            created_at: dec.u64()?,
        };
        if !token.is_consistent() {
            return Err(DecodeError::invalid(
                "token_id",
                "does not match token fields",
            ));
        }
        Ok(token)
    }
}

/// Commitment blinding owned by the holder of `owner`.
pub fn blinding_for(owner: &KeyPair) -> Blinding {
    hash_fields("qrpl/blinding", |e| {
        e.bytes(&owner.secret_key().0);
    })
    .0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payment {
    pub recipient: PublicKey,
    pub value: Amount,
}

impl Payment {
    pub fn new(recipient: &PublicKey, value: Amount) -> Self {
        Payment {
            recipient: recipient.clone(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub inputs: Vec<TokenId>,
    pub outputs: Vec<UtxoToken>,
    pub fee: Amount,
    pub zk_proof: ProofArtifact,
    pub signature: Signature,
    pub tx_hash: HashDigest,
}

pub fn compute_tx_hash(inputs: &[TokenId], outputs: &[UtxoToken], fee: Amount) -> HashDigest {
    hash_fields("qrpl/tx", |e| {
        e.list(inputs).list(outputs).u64(fee);
    })
}

impl Transaction {
    pub fn output_total(&self) -> Option<Amount> {
        self.outputs
            .iter()
            .try_fold(0u64, |acc, o| acc.checked_add(o.value))
    }

    pub fn statement(&self) -> TransferStatement {
        TransferStatement {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            fee: self.fee,
        }
    }

    pub fn hash_is_consistent(&self) -> bool {
        self.tx_hash == compute_tx_hash(&self.inputs, &self.outputs, self.fee)
    }
}

impl Canonical for Transaction {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.list(&self.inputs)
            .list(&self.outputs)
            .u64(self.fee)
            .nested(&self.zk_proof)
            .nested(&self.signature)
            .nested(&self.tx_hash);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Transaction {
            inputs: dec.list(MAX_TX_ITEMS)?,
            outputs: dec.list(MAX_TX_ITEMS)?,
            fee: dec.u64()?,
            zk_proof: dec.nested()?,
            signature: dec.nested()?,
            tx_hash: dec.nested()?,
        })
    }
}

/// Public part of a transfer: consumed ids, created tokens, fee.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferStatement {
    pub inputs: Vec<TokenId>,
    pub outputs: Vec<UtxoToken>,
    pub fee: Amount,
}

pub struct TransferWitness {
    pub sender: KeyPair,
    pub input_tokens: Vec<UtxoToken>,
    pub output_blindings: Vec<Blinding>,
}

impl Canonical for TransferStatement {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.list(&self.inputs).list(&self.outputs).u64(self.fee);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(TransferStatement {
            inputs: dec.list(MAX_TX_ITEMS)?,
            outputs: dec.list(MAX_TX_ITEMS)?,
            fee: dec.u64()?,
        })
    }
}

impl Statement for TransferStatement {
    const KIND: &'static str = "transfer";
    type Witness = TransferWitness;

    /// Ownership of every input, openings of every output commitment, and
    /// value conservation.
    fn is_satisfied(&self, w: &TransferWitness) -> bool {
        if !w.sender.is_well_formed()
            || w.input_tokens.len() != self.inputs.len()
            || w.output_blindings.len() != self.outputs.len()
        {
            return false;
        }
        let owned = w.input_tokens.iter().zip(&self.inputs).all(|(tok, id)| {
            tok.token_id == *id && tok.is_consistent() && tok.owner_epk == *w.sender.public_key()
        });
        let opened = self
            .outputs
            .iter()
            .zip(&w.output_blindings)
            .all(|(out, r)| out.is_consistent() && open(&out.commitment, out.value, r));
        let total_in = w
            .input_tokens
            .iter()
            .try_fold(0u64, |a, t| a.checked_add(t.value));
        let total_out = self
            .outputs
            .iter()
            .try_fold(self.fee, |a, t| a.checked_add(t.value));
        owned && opened && total_in.is_some() && total_in == total_out
    }
}

fn output_nonce(inputs: &[TokenId], index: usize) -> HashDigest {
    hash_fields("qrpl/output-nonce", |e| {
        e.list(inputs).u64(index as u64);
    })
}

/// One-time key for output `index` of a transaction spending `inputs`.
pub fn derive_output_key(
    sender: &KeyPair,
    recipient: &PublicKey,
    inputs: &[TokenId],
    index: usize,
) -> Result<KeyPair, LedgerError> {
    let nonce = output_nonce(inputs, index);
    Ok(derive_ephemeral_with_nonce(
        recipient.scheme(),
        &sender.secret_key().0,
        &recipient.to_canonical_bytes(),
        nonce.as_bytes(),
    )?)
}

/// A signed, proven transaction plus the one-time key pairs of its outputs,
/// which the sender hands to each recipient.
#[derive(Debug, Clone)]
pub struct PreparedTransaction {
    pub tx: Transaction,
    pub output_keys: Vec<KeyPair>,
}

/// Builds a transaction from explicit input tokens, without consulting ledger
/// state. Offline devices and the ledger-backed constructor both use this.
pub fn build_transaction(
    input_tokens: &[UtxoToken],
    sender: &KeyPair,
    payments: &[Payment],
    fee: Amount,
    created_at: Height,
    mode: ProverMode,
    rng: &mut impl Rng,
) -> Result<PreparedTransaction, LedgerError> {
    if input_tokens.is_empty() || payments.is_empty() {
        return Err(LedgerError::Malformed(
            "transaction needs inputs and outputs",
        ));
    }
    if input_tokens.len() > MAX_TX_ITEMS || payments.len() > MAX_TX_ITEMS {
        return Err(LedgerError::Malformed("too many inputs or outputs"));
    }
    let total_in = input_tokens
        .iter()
        .try_fold(0u64, |a, t| a.checked_add(t.value))
        .ok_or(LedgerError::Overflow)?;
    let total_out = payments
        .iter()
        .try_fold(fee, |a, p| a.checked_add(p.value))
        .ok_or(LedgerError::Overflow)?;
    if total_in != total_out {
        return Err(LedgerError::Imbalance {
            inputs: total_in,
            outputs: total_out - fee,
            fee,
        });
    }
    if let Some(tok) = input_tokens
        .iter()
        .find(|t| t.owner_epk != *sender.public_key())
    {
        return Err(LedgerError::NotOwner(tok.token_id));
    }

    let inputs: Vec<TokenId> = input_tokens.iter().map(|t| t.token_id).collect();
    let mut outputs = Vec::with_capacity(payments.len());
    let mut output_keys = Vec::with_capacity(payments.len());
    let mut output_blindings = Vec::with_capacity(payments.len());
    for (index, payment) in payments.iter().enumerate() {
        let key = derive_output_key(sender, &payment.recipient, &inputs, index)?;
        let blinding = blinding_for(&key);
        outputs.push(UtxoToken::new(
            commit(payment.value, &blinding),
            payment.value,
            key.public_key().clone(),
            created_at,
        ));
        output_blindings.push(blinding);
        output_keys.push(key);
    }

    let tx_hash = compute_tx_hash(&inputs, &outputs, fee);
    let statement = TransferStatement {
        inputs: inputs.clone(),
        outputs: outputs.clone(),
        fee,
    };
    let witness = TransferWitness {
        sender: sender.clone(),
        input_tokens: input_tokens.to_vec(),
        output_blindings,
    };
    let zk_proof = crypto::prove(&statement, &witness, mode, rng)?;
    let signature = crypto::sign(tx_hash.as_bytes(), sender)?;
    Ok(PreparedTransaction {
        tx: Transaction {
            inputs,
            outputs,
            fee,
            zk_proof,
            signature,
            tx_hash,
        },
        output_keys,
    })
}

//! Transparent-oracle stand-in for a zero-knowledge proof system.
//!
//! The prover evaluates the statement's predicate on the witness directly and
//! emits an artifact bound to the statement digest. Artifact size and
//! generation time are sampled from the module RNG within the ranges of
//! production STARK provers; the encoded artifact really carries that many
//! body bytes so transport and block-size accounting see realistic payloads.

use std::ops::RangeInclusive;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hash::{expand, hash_fields, HashDigest};
use super::CryptoError;
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder};

pub const PROOF_SIZE_BYTES: RangeInclusive<u32> = 45_000..=150_000;
pub const PROOF_GEN_MS: RangeInclusive<u32> = 200..=500;

/// A public statement with a checkable predicate over a private witness.
pub trait Statement: Canonical {
    const KIND: &'static str;
    type Witness: ?Sized;

    fn is_satisfied(&self, witness: &Self::Witness) -> bool;

    fn digest(&self) -> HashDigest {
        hash_fields("qrpl/statement", |e| {
            e.bytes(Self::KIND.as_bytes()).nested(self);
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProverMode {
    #[default]
    Honest,
    /// Never refuses; every artifact is flagged invalid, as a forger's would be.
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofArtifact {
    pub statement_digest: HashDigest,
    pub simulated_size_bytes: u32,
    pub simulated_gen_ms: u32,
    pub valid: bool,
}

impl ProofArtifact {
    fn body(&self) -> Vec<u8> {
        let seed = hash_fields("qrpl/proof-body", |e| {
            e.nested(&self.statement_digest)
                .u32(self.simulated_size_bytes)
                .u32(self.simulated_gen_ms)
                .bool(self.valid);
        });
        expand(seed.as_bytes(), self.simulated_size_bytes as usize)
    }
}

impl Canonical for ProofArtifact {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.nested(&self.statement_digest)
            .u32(self.simulated_size_bytes)
            .u32(self.simulated_gen_ms)
            .bool(self.valid)
            .bytes(&self.body());
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let artifact = ProofArtifact {
            statement_digest: dec.nested()?,
            simulated_size_bytes: dec.u32()?,
            simulated_gen_ms: dec.u32()?,
            valid: dec.bool()?,
        };
        if !PROOF_SIZE_BYTES.contains(&artifact.simulated_size_bytes) {
            return Err(DecodeError::invalid(
                "proof size",
                artifact.simulated_size_bytes.to_string(),
            ));
        }
        if !PROOF_GEN_MS.contains(&artifact.simulated_gen_ms) {
            return Err(DecodeError::invalid(
                "proof time",
                artifact.simulated_gen_ms.to_string(),
            ));
        }
        let body = dec.bytes()?;
        if body != artifact.body().as_slice() {
            return Err(DecodeError::invalid("proof body", "transcript mismatch"));
        }
        Ok(artifact)
    }
}

pub fn prove<S: Statement>(
    statement: &S,
    witness: &S::Witness,
    mode: ProverMode,
    rng: &mut impl Rng,
) -> Result<ProofArtifact, CryptoError> {
    let satisfied = statement.is_satisfied(witness);
    if !satisfied && mode == ProverMode::Honest {
        return Err(CryptoError::ConstraintViolation(S::KIND));
    }
    let valid = satisfied && mode == ProverMode::Honest;
    Ok(ProofArtifact {
        statement_digest: statement.digest(),
        simulated_size_bytes: rng.gen_range(PROOF_SIZE_BYTES),
        simulated_gen_ms: rng.gen_range(PROOF_GEN_MS),
        valid,
    })
}

pub fn verify_proof<S: Statement>(statement: &S, proof: &ProofArtifact) -> bool {
    proof.valid && proof.statement_digest == statement.digest()
}

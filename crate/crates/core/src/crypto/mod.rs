//! Pluggable primitives: hashing, commitments, simulated post-quantum
//! signatures, a hash-based VRF and a simulated proof system.

mod commitment;
mod hash;
mod proof;
mod scheme;
mod vrf;

use thiserror::Error;

pub use commitment::{commit, open, Blinding, Commitment};
pub use hash::{expand, hash, hash_fields, HashDigest};
pub use proof::{
    prove, verify_proof, ProofArtifact, ProverMode, Statement, PROOF_GEN_MS, PROOF_SIZE_BYTES,
};
pub use scheme::{
    derive_ephemeral, derive_ephemeral_with_nonce, sign, verify, KeyPair, PublicKey, SchemeId,
    SchemeProfile, SecretKey, Signature, DILITHIUM2, ECDSA_P256, FALCON512,
};
pub use vrf::{vrf_eval, vrf_verify, VrfOutput};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("malformed key: {0}")]
    MalformedKey(&'static str),
    #[error("witness does not satisfy {0} statement")]
    ConstraintViolation(&'static str),
}

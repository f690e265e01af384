//! Hash-based VRF stand-in.
//!
//! The output is `hash(secret_key || input)`; the proof is a tag binding the
//! output to the public key and input. Outputs are unpredictable to anyone
//! without the secret key.

use serde::{Deserialize, Serialize};

use super::hash::{expand, hash_fields, HashDigest};
use super::scheme::{KeyPair, PublicKey};
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VrfOutput {
    pub value: HashDigest,
    #[serde(with = "hex_bytes")]
    pub proof: Vec<u8>,
}

impl VrfOutput {
    /// The output as a uniform fraction in (0, 1).
    pub fn fraction(&self) -> f64 {
        self.value.unit_fraction()
    }
}

const PROOF_LEN: usize = 64;

fn proof_tag(public_key: &PublicKey, input: &[u8], value: &HashDigest) -> Vec<u8> {
    let tag = hash_fields("qrpl/vrf-proof", |e| {
        e.nested(public_key).bytes(input).nested(value);
    });
    expand(tag.as_bytes(), PROOF_LEN)
}

pub fn vrf_eval(keypair: &KeyPair, input: &[u8]) -> VrfOutput {
    let value = hash_fields("qrpl/vrf", |e| {
        e.bytes(&keypair.secret_key().0).bytes(input);
    });
    let proof = proof_tag(keypair.public_key(), input, &value);
    VrfOutput { value, proof }
}

pub fn vrf_verify(public_key: &PublicKey, input: &[u8], output: &VrfOutput) -> bool {
    output.proof.len() == PROOF_LEN && output.proof == proof_tag(public_key, input, &output.value)
}

impl Canonical for VrfOutput {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.nested(&self.value).bytes(&self.proof);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(VrfOutput {
            value: dec.nested()?,
            proof: dec.bytes()?.to_vec(),
        })
    }
}

pub(crate) mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

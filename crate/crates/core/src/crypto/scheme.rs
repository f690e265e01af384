//! Signature scheme profiles, key pairs, and simulated signatures.
//!
//! Signatures are hash constructions stretched to the exact wire size of the
//! scheme they stand in for. A signature is a SHAKE256 expansion of the
//! digest over (public key, message), so any single-bit change in the message,
//! key, or signature is detected. Unforgeability is not modelled: spending
//! authority is enforced by the ownership predicate of the proof system.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::hash::{expand, hash_fields};
use super::CryptoError;
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemeProfile {
    pub name: &'static str,
    pub public_key_bytes: usize,
    pub signature_bytes: usize,
    pub sign_ops_per_sec: u32,
    pub verify_ops_per_sec: u32,
    pub security_bits: u32,
}

pub const ECDSA_P256: SchemeProfile = SchemeProfile {
    name: "ECDSA-P256",
    public_key_bytes: 32,
    signature_bytes: 64,
    sign_ops_per_sec: 10_000,
    verify_ops_per_sec: 5_000,
    security_bits: 128,
};

pub const DILITHIUM2: SchemeProfile = SchemeProfile {
    name: "Dilithium-2",
    public_key_bytes: 1_312,
    signature_bytes: 2_420,
    sign_ops_per_sec: 12_000,
    verify_ops_per_sec: 6_000,
    security_bits: 128,
};

pub const FALCON512: SchemeProfile = SchemeProfile {
    name: "Falcon-512",
    public_key_bytes: 897,
    signature_bytes: 666,
    sign_ops_per_sec: 8_000,
    verify_ops_per_sec: 7_000,
    security_bits: 128,
};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeId {
    EcdsaP256,
    #[default]
    Dilithium2,
    Falcon512,
}

impl SchemeId {
    pub const ALL: [SchemeId; 3] = [
        SchemeId::EcdsaP256,
        SchemeId::Dilithium2,
        SchemeId::Falcon512,
    ];

    pub fn profile(self) -> &'static SchemeProfile {
        match self {
            SchemeId::EcdsaP256 => &ECDSA_P256,
            SchemeId::Dilithium2 => &DILITHIUM2,
            SchemeId::Falcon512 => &FALCON512,
        }
    }

    fn tag(self) -> u8 {
        match self {
            SchemeId::EcdsaP256 => 0,
            SchemeId::Dilithium2 => 1,
            SchemeId::Falcon512 => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, DecodeError> {
        match tag {
            0 => Ok(SchemeId::EcdsaP256),
            1 => Ok(SchemeId::Dilithium2),
            2 => Ok(SchemeId::Falcon512),
            other => Err(DecodeError::invalid(
                "scheme",
                format!("unknown tag {other}"),
            )),
        }
    }
}

impl Canonical for SchemeId {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.u8(self.tag());
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        SchemeId::from_tag(dec.u8()?)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey(pub [u8; 32]);

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey {
    scheme: SchemeId,
    bytes: Vec<u8>,
}

impl PublicKey {
    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Short printable fingerprint.
    pub fn fingerprint(&self) -> String {
        hex::encode(&super::hash(&self.bytes).0[..8])
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({:?}, {})", self.scheme, self.fingerprint())
    }
}

impl Canonical for PublicKey {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.nested(&self.scheme).bytes(&self.bytes);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let scheme: SchemeId = dec.nested()?;
        let bytes = dec.bytes()?;
        let expected = scheme.profile().public_key_bytes;
        if bytes.len() != expected {
            return Err(DecodeError::BadLength {
                expected,
                actual: bytes.len(),
            });
        }
        Ok(PublicKey {
            scheme,
            bytes: bytes.to_vec(),
        })
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Signature {
    scheme: SchemeId,
    bytes: Vec<u8>,
}

impl Signature {
    pub fn from_parts(scheme: SchemeId, bytes: Vec<u8>) -> Self {
        Signature { scheme, bytes }
    }

    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bytes_mut(&mut self) -> &mut Vec<u8> {
        &mut self.bytes
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Signature({:?}, {} bytes)",
            self.scheme,
            self.bytes.len()
        )
    }
}

impl Canonical for Signature {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.nested(&self.scheme).bytes(&self.bytes);
    }

    // Length is not enforced here: a short signature must still decode so
    // that verification can reject it.
    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let scheme: SchemeId = dec.nested()?;
        let bytes = dec.bytes()?.to_vec();
        Ok(Signature { scheme, bytes })
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    secret_key: SecretKey,
    public_key: PublicKey,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public_key", &self.public_key)
            .finish_non_exhaustive()
    }
}

fn public_from_secret(scheme: SchemeId, secret: &SecretKey) -> PublicKey {
    let seed = hash_fields("qrpl/public-key", |e| {
        e.nested(&scheme).bytes(&secret.0);
    });
    PublicKey {
        scheme,
        bytes: expand(seed.as_bytes(), scheme.profile().public_key_bytes),
    }
}

impl KeyPair {
    pub fn from_secret(scheme: SchemeId, secret: SecretKey) -> Self {
        let public_key = public_from_secret(scheme, &secret);
        KeyPair {
            secret_key: secret,
            public_key,
        }
    }

    pub fn generate(scheme: SchemeId, rng: &mut impl RngCore) -> Self {
        let mut secret = [0u8; 32];
        rng.fill_bytes(&mut secret);
        Self::from_secret(scheme, SecretKey(secret))
    }

    pub fn scheme(&self) -> SchemeId {
        self.public_key.scheme
    }

    pub fn profile(&self) -> &'static SchemeProfile {
        self.scheme().profile()
    }

    pub fn secret_key(&self) -> &SecretKey {
        &self.secret_key
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public_key
    }

    pub fn is_well_formed(&self) -> bool {
        public_from_secret(self.scheme(), &self.secret_key) == self.public_key
    }
}

impl Canonical for KeyPair {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.nested(&self.scheme()).bytes(&self.secret_key.0);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let scheme: SchemeId = dec.nested()?;
        let secret = SecretKey(dec.fixed()?);
        Ok(KeyPair::from_secret(scheme, secret))
    }
}

/// Derives the one-time key for a payment: the secret is the hash of the
/// length-prefixed concatenation of sender secret, recipient public key and
/// a per-output nonce; the public key is derived from that secret.
pub fn derive_ephemeral_with_nonce(
    scheme: SchemeId,
    sender_sk: &[u8],
    recipient_pk: &[u8],
    nonce: &[u8],
) -> Result<KeyPair, CryptoError> {
    if sender_sk.is_empty() || recipient_pk.is_empty() {
        return Err(CryptoError::MalformedKey("empty key material"));
    }
    let shared = hash_fields("qrpl/ephemeral", |e| {
        e.bytes(sender_sk).bytes(recipient_pk).bytes(nonce);
    });
    Ok(KeyPair::from_secret(scheme, SecretKey(shared.0)))
}

pub fn derive_ephemeral(sender_sk: &[u8], recipient_pk: &[u8]) -> Result<KeyPair, CryptoError> {
    derive_ephemeral_with_nonce(SchemeId::Dilithium2, sender_sk, recipient_pk, &[])
}

fn signature_bytes(public_key: &PublicKey, message: &[u8]) -> Vec<u8> {
    let tag = hash_fields("qrpl/signature", |e| {
        e.nested(public_key).bytes(message);
    });
    expand(tag.as_bytes(), public_key.scheme.profile().signature_bytes)
}

pub fn sign(message: &[u8], keypair: &KeyPair) -> Result<Signature, CryptoError> {
    if !keypair.is_well_formed() {
        return Err(CryptoError::MalformedKey(
            "public key does not match secret key",
        ));
    }
    Ok(Signature {
        scheme: keypair.scheme(),
        bytes: signature_bytes(&keypair.public_key, message),
    })
}

pub fn verify(message: &[u8], signature: &Signature, public_key: &PublicKey) -> bool {
    let profile = public_key.scheme.profile();
    if signature.scheme != public_key.scheme
        || signature.bytes.len() != profile.signature_bytes
        || public_key.bytes.len() != profile.public_key_bytes
    {
        return false;
    }
    signature.bytes == signature_bytes(public_key, message)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn profile_sizes_surface_in_keys_and_signatures() {
        let mut rng = seeded(1);
        for scheme in SchemeId::ALL {
            let kp = KeyPair::generate(scheme, &mut rng);
            let sig = sign(b"m", &kp).unwrap();
            assert_eq!(
                kp.public_key().as_bytes().len(),
                scheme.profile().public_key_bytes
            );
            assert_eq!(sig.as_bytes().len(), scheme.profile().signature_bytes);
            assert!(verify(b"m", &sig, kp.public_key()));
        }
        assert_eq!(SchemeId::Dilithium2.profile().signature_bytes, 2_420);
        assert_eq!(SchemeId::Falcon512.profile().signature_bytes, 666);
    }

    #[test]
    fn tampered_message_fails() {
        let kp = KeyPair::generate(SchemeId::Dilithium2, &mut seeded(2));
        let sig = sign(b"hello", &kp).unwrap();
        assert!(!verify(b"hellp", &sig, kp.public_key()));
    }

    #[test]
    fn truncated_signature_is_false_not_error() {
        let kp = KeyPair::generate(SchemeId::Falcon512, &mut seeded(3));
        let mut sig = sign(b"x", &kp).unwrap();
        sig.bytes_mut().pop();
        assert!(!verify(b"x", &sig, kp.public_key()));
    }

    #[test]
    fn cross_scheme_signature_rejected() {
        let mut rng = seeded(4);
        let a = KeyPair::generate(SchemeId::EcdsaP256, &mut rng);
        let b = KeyPair::generate(SchemeId::Falcon512, &mut rng);
        let sig = sign(b"x", &a).unwrap();
        assert!(!verify(b"x", &sig, b.public_key()));
    }

    #[test]
    fn empty_ephemeral_inputs_rejected() {
        assert!(matches!(
            derive_ephemeral(&[], b"pk"),
            Err(CryptoError::MalformedKey(_))
        ));
        assert!(matches!(
            derive_ephemeral(b"sk", &[]),
            Err(CryptoError::MalformedKey(_))
        ));
    }

    #[test]
    fn ephemeral_derivation_is_order_sensitive() {
        let ab = derive_ephemeral(b"alice", b"bob").unwrap();
        let ba = derive_ephemeral(b"bob", b"alice").unwrap();
        assert_ne!(ab.public_key(), ba.public_key());
        assert_eq!(ab, derive_ephemeral(b"alice", b"bob").unwrap());
    }

    #[test]
    fn keypair_roundtrips_through_encoding() {
        let kp = KeyPair::generate(SchemeId::EcdsaP256, &mut seeded(5));
        let back = KeyPair::from_canonical_bytes(&kp.to_canonical_bytes()).unwrap();
        assert_eq!(kp, back);
    }
}

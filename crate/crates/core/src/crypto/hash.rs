use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::{Digest, Sha3_256, Shake256};

use crate::encoding::{Canonical, DecodeError, Decoder, Encoder};

/// A 32-byte SHA3-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HashDigest(pub [u8; 32]);

impl HashDigest {
    pub const LEN: usize = 32;

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(HashDigest(out))
    }

    /// Leading 8 bytes as a big-endian integer.
    pub fn prefix_u64(&self) -> u64 {
        u64::from_be_bytes(self.0[..8].try_into().expect("8 bytes"))
    }

    /// Maps the digest to a fraction strictly inside (0, 1) using 52 bits.
    pub fn unit_fraction(&self) -> f64 {
        let bits = self.prefix_u64() >> 12;
        (bits as f64 + 0.5) / (1u64 << 52) as f64
    }
}

impl fmt::Debug for HashDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HashDigest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for HashDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for HashDigest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for HashDigest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        HashDigest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

impl Canonical for HashDigest {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.bytes(&self.0);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(HashDigest(dec.fixed()?))
    }
}

pub fn hash(data: &[u8]) -> HashDigest {
    HashDigest(Sha3_256::digest(data).into())
}

/// Hashes a domain tag followed by canonically encoded fields.
pub fn hash_fields(domain: &str, build: impl FnOnce(&mut Encoder)) -> HashDigest {
    let mut enc = Encoder::new();
    enc.bytes(domain.as_bytes());
    build(&mut enc);
    hash(&enc.finish())
}

/// Deterministically stretches a seed to `len` bytes with SHAKE256.
pub fn expand(seed: &[u8], len: usize) -> Vec<u8> {
    let mut xof = Shake256::default();
    xof.update(seed);
    let mut out = vec![0u8; len];
    xof.finalize_xof().read(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_sha3_vector() {
        assert_eq!(
            hash(b"").to_hex(),
            "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a"
        );
    }

    #[test]
    fn empty_and_zero_byte_differ() {
        assert_ne!(hash(&[]), hash(&[0]));
    }

    #[test]
    fn unit_fraction_in_open_interval() {
        assert!(HashDigest([0; 32]).unit_fraction() > 0.0);
        assert!(HashDigest([0xff; 32]).unit_fraction() < 1.0);
    }

    #[test]
    fn expand_is_prefix_stable() {
        let short = expand(b"seed", 10);
        let long = expand(b"seed", 100);
        assert_eq!(&long[..10], &short[..]);
    }
}

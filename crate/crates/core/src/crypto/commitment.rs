use serde::{Deserialize, Serialize};

use super::hash::{hash_fields, HashDigest};
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder};

pub type Blinding = [u8; 32];

/// Hash commitment to an amount. Binding only; hiding is not claimed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Commitment {
    pub digest: HashDigest,
}

fn commitment_digest(value: u64, blinding: &Blinding) -> HashDigest {
    hash_fields("qrpl/commitment", |e| {
        e.u64(value).bytes(blinding);
    })
}

pub fn commit(value: u64, blinding: &Blinding) -> Commitment {
    Commitment {
        digest: commitment_digest(value, blinding),
    }
}

pub fn open(commitment: &Commitment, value: u64, blinding: &Blinding) -> bool {
    commitment_digest(value, blinding) == commitment.digest
}

impl Canonical for Commitment {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.nested(&self.digest);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Commitment {
            digest: dec.nested()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opens_only_for_original_pair() {
        let r = [7u8; 32];
        let mut r2 = r;
        r2[31] ^= 1;
        let c = commit(10, &r);
        assert!(open(&c, 10, &r));
        assert!(!open(&c, 11, &r));
        assert!(!open(&c, 10, &r2));
    }
}

//! Seeded RNG helpers. All randomness in the crate flows through these.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::crypto::hash_fields;

pub type SimRng = ChaCha12Rng;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent stream for `(seed, label, index)`; used for per-run and
/// per-epoch streams so results do not depend on evaluation order.
pub fn derive(seed: u64, label: &str, index: u64) -> SimRng {
    let digest = hash_fields("qrpl/rng", |e| {
        e.u64(seed).bytes(label.as_bytes()).u64(index);
    });
    SimRng::from_seed(digest.0)
}

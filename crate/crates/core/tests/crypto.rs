use std::collections::HashSet;

use proptest::prelude::*;
use qrpl_core::crypto::{
    commit, derive_ephemeral, hash, open, prove, sign, verify, verify_proof, vrf_eval, vrf_verify,
    KeyPair, ProverMode, SchemeId, Signature, Statement,
};
use qrpl_core::encoding::{Canonical, DecodeError, Decoder, Encoder};
use qrpl_core::rng::seeded;
use rand::{Rng, RngCore};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn table_sizes_surface_exactly() {
    let expected = [
        (SchemeId::EcdsaP256, "ECDSA-P256", 32, 64),
        (SchemeId::Dilithium2, "Dilithium-2", 1312, 2420),
        (SchemeId::Falcon512, "Falcon-512", 897, 666),
    ];
    let mut rng = seeded(1);
    for (scheme, name, pk, sig) in expected {
        let p = scheme.profile();
        assert_eq!(
            (p.name, p.public_key_bytes, p.signature_bytes),
            (name, pk, sig)
        );
        let kp = KeyPair::generate(scheme, &mut rng);
        assert_eq!(kp.public_key().as_bytes().len(), pk);
        let s = sign(b"msg", &kp).unwrap();
        assert_eq!(s.as_bytes().len(), sig);
        assert!(verify(b"msg", &s, kp.public_key()));
    }
    assert_eq!(SchemeId::ALL.len(), 3);
}

#[test]
fn million_hashes_without_collision() {
    let mut rng = seeded(2);
    let mut seen = HashSet::with_capacity(1_000_000);
    let mut buf = [0u8; 64];
    for _ in 0..1_000_000 {
        rng.fill_bytes(&mut buf);
        assert!(seen.insert(hash(&buf)));
    }
    assert_ne!(hash(b""), hash(&[0]));
}

#[test]
fn ephemeral_keys_do_not_collide() {
    let mut rng = seeded(3);
    let sender = KeyPair::generate(SchemeId::Dilithium2, &mut rng);
    let mut seen = HashSet::new();
    for _ in 0..10_000 {
        let recipient = KeyPair::generate(SchemeId::Dilithium2, &mut rng);
        let a =
            derive_ephemeral(&sender.secret_key().0, recipient.public_key().as_bytes()).unwrap();
        let b =
            derive_ephemeral(&sender.secret_key().0, recipient.public_key().as_bytes()).unwrap();
        assert_eq!(a, b);
        assert!(seen.insert(a.public_key().clone()));
    }
}

#[test]
fn vrf_outputs_are_uniform() {
    const BUCKETS: usize = 50;
    let mut rng = seeded(4);
    let kp = KeyPair::generate(SchemeId::Dilithium2, &mut rng);
    let mut counts = [0u64; BUCKETS];
    for i in 0..100_000u64 {
        let input = i.to_be_bytes();
        let out = vrf_eval(&kp, &input);
        if i % 1000 == 0 {
            assert!(vrf_verify(kp.public_key(), &input, &out));
            assert_eq!(out, vrf_eval(&kp, &input));
        }
        counts[(out.fraction() * BUCKETS as f64) as usize] += 1;
    }
    let expected = 100_000.0 / BUCKETS as f64;
    let stat: f64 = counts
        .iter()
        .map(|c| (*c as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new((BUCKETS - 1) as f64).unwrap().cdf(stat);
    assert!(p > 0.001, "chi2 {stat} p {p}");
}

/// Sum of parts equals a public total.
struct Balance {
    total: u64,
}

impl Canonical for Balance {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.u64(self.total);
    }
    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Balance { total: dec.u64()? })
    }
}

impl Statement for Balance {
    const KIND: &'static str = "test/balance";
    type Witness = [u64];
    fn is_satisfied(&self, parts: &[u64]) -> bool {
        parts.iter().sum::<u64>() == self.total
    }
}

#[test]
fn proof_samples_stay_in_range() {
    let mut rng = seeded(5);
    let stmt = Balance { total: 10 };
    let mut total_ms = 0u64;
    for _ in 0..10_000 {
        let p = prove(&stmt, &[3, 7], ProverMode::Honest, &mut rng).unwrap();
        assert!((45_000..=150_000).contains(&p.simulated_size_bytes));
        assert!((200..=500).contains(&p.simulated_gen_ms));
        total_ms += u64::from(p.simulated_gen_ms);
    }
    let mean = total_ms as f64 / 10_000.0;
    assert!((300.0..=400.0).contains(&mean), "{mean}");
    let p = prove(&stmt, &[3, 7], ProverMode::Honest, &mut rng).unwrap();
    assert!(verify_proof(&stmt, &p));
    assert!(!verify_proof(&Balance { total: 11 }, &p));
    assert!(prove(&stmt, &[3, 8], ProverMode::Honest, &mut rng).is_err());
}

#[test]
fn equal_seeds_give_identical_artifacts() {
    let stmt = Balance { total: 1 };
    let a = prove(&stmt, &[1], ProverMode::Honest, &mut seeded(9)).unwrap();
    let b = prove(&stmt, &[1], ProverMode::Honest, &mut seeded(9)).unwrap();
    assert_eq!(a.to_canonical_bytes(), b.to_canonical_bytes());
    let ka = KeyPair::generate(SchemeId::Falcon512, &mut seeded(9));
    let kb = KeyPair::generate(SchemeId::Falcon512, &mut seeded(9));
    assert_eq!(ka, kb);
}

#[test]
fn one_bit_mutations_never_verify() {
    let mut rng = seeded(6);
    for trial in 0..1000 {
        let scheme = SchemeId::ALL[trial % 3];
        let kp = KeyPair::generate(scheme, &mut rng);
        let mut msg = vec![0u8; rng.gen_range(1..64)];
        rng.fill_bytes(&mut msg);
        let sig = sign(&msg, &kp).unwrap();
        assert!(verify(&msg, &sig, kp.public_key()));

        let mut m = msg.clone();
        let i = rng.gen_range(0..m.len());
        m[i] ^= 1 << rng.gen_range(0..8);
        assert!(!verify(&m, &sig, kp.public_key()));

        let mut s = sig.as_bytes().to_vec();
        let i = rng.gen_range(0..s.len());
        s[i] ^= 1 << rng.gen_range(0..8);
        assert!(!verify(
            &msg,
            &Signature::from_parts(scheme, s),
            kp.public_key()
        ));

        let mut pk = kp.public_key().to_canonical_bytes();
        let i = rng.gen_range(pk.len() - scheme.profile().public_key_bytes..pk.len());
        pk[i] ^= 1 << rng.gen_range(0..8);
        let pk = qrpl_core::crypto::PublicKey::from_canonical_bytes(&pk).unwrap();
        assert!(!verify(&msg, &sig, &pk));
    }
}

proptest! {
    #[test]
    fn commitments_bind_value_and_blinding(v in any::<u64>(), w in any::<u64>(), r in any::<[u8; 32]>(), s in any::<[u8; 32]>()) {
        let c = commit(v, &r);
        prop_assert!(open(&c, v, &r));
        prop_assert_eq!(open(&c, w, &r), v == w);
        prop_assert_eq!(open(&c, v, &s), r == s);
    }

    #[test]
    fn keys_and_signatures_roundtrip(seed in any::<u64>(), scheme in 0usize..3, msg in prop::collection::vec(any::<u8>(), 0..256)) {
        let kp = KeyPair::generate(SchemeId::ALL[scheme], &mut seeded(seed));
        let sig = sign(&msg, &kp).unwrap();
        let sig2 = Signature::from_canonical_bytes(&sig.to_canonical_bytes()).unwrap();
        prop_assert_eq!(&sig2, &sig);
        prop_assert_eq!(KeyPair::from_canonical_bytes(&kp.to_canonical_bytes()).unwrap(), kp.clone());
        prop_assert!(verify(&msg, &sig2, kp.public_key()));
    }
}

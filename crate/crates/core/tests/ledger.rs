use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use qrpl_core::crypto::{KeyPair, ProverMode, SchemeId};
use qrpl_core::encoding::Canonical;
use qrpl_core::ledger::{
    build_transaction, Amount, FeePolicy, LedgerError, LedgerState, Payment, PruningConfig,
    TokenId, Transaction, UtxoToken, Verdict,
};
use qrpl_core::rng::seeded;
use rand::Rng;

fn key(rng: &mut impl rand::RngCore) -> KeyPair {
    KeyPair::generate(SchemeId::Dilithium2, rng)
}

/// A ledger with one token per value, all owned by `owner`.
fn funded(owner: &KeyPair, values: &[Amount]) -> (LedgerState, Vec<UtxoToken>) {
    let mut ledger = LedgerState::new();
    let tokens: Vec<UtxoToken> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            // Distinct tokens for the same owner need distinct heights.
            let t = UtxoToken::for_owner(owner, *v, i as u64);
            ledger.mint(t.clone()).unwrap();
            t
        })
        .collect();
    (ledger, tokens)
}

#[test]
fn alice_pays_bob_ten() {
    let mut rng = seeded(1);
    let alice = key(&mut rng);
    let bob = key(&mut rng);
    let (mut ledger, tokens) = funded(&alice, &[10]);
    let prepared = ledger
        .create_transaction(
            &alice,
            &[tokens[0].token_id],
            &[Payment::new(bob.public_key(), 10)],
            0,
            &mut rng,
        )
        .unwrap();
    assert_eq!(ledger.validate_transaction(&prepared.tx), Verdict::Accept);
    let out = &prepared.tx.outputs[0];
    assert_ne!(&out.owner_epk, alice.public_key());
    assert_ne!(&out.owner_epk, bob.public_key());
    assert_ne!(out.owner_epk, tokens[0].owner_epk);
    ledger.apply_transaction(&prepared.tx).unwrap();
    assert!(ledger.spent_log().contains_key(&tokens[0].token_id));
    assert!(ledger.get_unspent(&tokens[0].token_id).is_none());
    assert_eq!(ledger.total_supply(), 10);
}

#[test]
fn imbalance_is_rejected_with_message() {
    let mut rng = seeded(2);
    let alice = key(&mut rng);
    let bob = key(&mut rng);
    let (ledger, tokens) = funded(&alice, &[100]);
    let err = ledger
        .create_transaction(
            &alice,
            &[tokens[0].token_id],
            &[Payment::new(bob.public_key(), 90)],
            5,
            &mut rng,
        )
        .unwrap_err();
    assert_eq!(
        err,
        LedgerError::Imbalance {
            inputs: 100,
            outputs: 90,
            fee: 5
        }
    );
    assert!(err.to_string().contains("Value imbalance in transaction"));
}

#[test]
fn default_fee_is_one_basis_point() {
    let policy = FeePolicy::default();
    assert_eq!(policy.fee_for(1_000_000), 100);
    assert_eq!(policy.fee_for(9_999), 0);
    assert_eq!(policy.fee_for(10_000), 1);
}

#[test]
fn unknown_input_is_rejected_at_construction() {
    let mut rng = seeded(3);
    let alice = key(&mut rng);
    let (ledger, _) = funded(&alice, &[10]);
    let missing = TokenId::default();
    assert_eq!(
        ledger
            .create_transaction(
                &alice,
                &[missing],
                &[Payment::new(alice.public_key(), 10)],
                0,
                &mut rng
            )
            .unwrap_err(),
        LedgerError::UnknownInput(missing)
    );
}

#[test]
fn replay_is_double_spend() {
    let mut rng = seeded(4);
    let alice = key(&mut rng);
    let bob = key(&mut rng);
    let (mut ledger, tokens) = funded(&alice, &[50]);
    let tx = ledger
        .create_transaction(
            &alice,
            &[tokens[0].token_id],
            &[Payment::new(bob.public_key(), 50)],
            0,
            &mut rng,
        )
        .unwrap()
        .tx;
    ledger.apply_transaction(&tx).unwrap();
    assert_eq!(ledger.validate_transaction(&tx), Verdict::DoubleSpend);
    assert_eq!(
        ledger.apply_transaction(&tx),
        Err(LedgerError::ProtocolViolation(Verdict::DoubleSpend))
    );
}

#[test]
fn adversarial_proof_is_rejected() {
    let mut rng = seeded(5);
    let alice = key(&mut rng);
    let bob = key(&mut rng);
    let (ledger, tokens) = funded(&alice, &[50]);
    let tx = build_transaction(
        &tokens,
        &alice,
        &[Payment::new(bob.public_key(), 50)],
        0,
        0,
        ProverMode::Adversarial,
        &mut rng,
    )
    .unwrap()
    .tx;
    assert_eq!(ledger.validate_transaction(&tx), Verdict::BadProof);
}

#[test]
fn foreign_signer_is_rejected() {
    let mut rng = seeded(6);
    let alice = key(&mut rng);
    let mallory = key(&mut rng);
    let (ledger, tokens) = funded(&alice, &[50]);
    let mut tx = ledger
        .create_transaction(
            &alice,
            &[tokens[0].token_id],
            &[Payment::new(mallory.public_key(), 50)],
            0,
            &mut rng,
        )
        .unwrap()
        .tx;
    tx.signature = qrpl_core::crypto::sign(tx.tx_hash.as_bytes(), &mallory).unwrap();
    assert_eq!(ledger.validate_transaction(&tx), Verdict::BadSignature);
}

#[test]
fn tampered_output_value_is_caught() {
    let mut rng = seeded(7);
    let alice = key(&mut rng);
    let bob = key(&mut rng);
    let (ledger, tokens) = funded(&alice, &[50]);
    let mut tx = ledger
        .create_transaction(
            &alice,
            &[tokens[0].token_id],
            &[Payment::new(bob.public_key(), 50)],
            0,
            &mut rng,
        )
        .unwrap()
        .tx;
    tx.outputs[0].value = 60;
    assert_ne!(ledger.validate_transaction(&tx), Verdict::Accept);
}

/// Wallet bookkeeping kept independently of the ledger.
struct Oracle {
    owned: BTreeMap<TokenId, (Amount, KeyPair)>,
    consumed: BTreeSet<TokenId>,
    supply: Amount,
}

#[test]
fn thousand_random_transactions_match_accounting_oracle() {
    let mut rng = seeded(8);
    let policy = FeePolicy::default();
    let users: Vec<KeyPair> = (0..10).map(|_| key(&mut rng)).collect();
    let mut ledger = LedgerState::new();
    let mut oracle = Oracle {
        owned: BTreeMap::new(),
        consumed: BTreeSet::new(),
        supply: 0,
    };
    for (i, u) in users.iter().enumerate() {
        for j in 0..5u64 {
            let t = UtxoToken::for_owner(u, 2_000_000 + j, i as u64 * 10 + j);
            ledger.mint(t.clone()).unwrap();
            oracle.supply += t.value;
            oracle.owned.insert(t.token_id, (t.value, u.clone()));
        }
    }
    let initial = oracle.supply;
    let mut fees: Amount = 0;
    for _ in 0..1000 {
        let ids: Vec<TokenId> = oracle.owned.keys().copied().collect();
        let id = ids[rng.gen_range(0..ids.len())];
        let (value, owner) = oracle.owned[&id].clone();
        let fee = policy.fee_for(value);
        let first = rng.gen_range(1..=value - fee);
        let mut payments = vec![Payment::new(
            users[rng.gen_range(0..users.len())].public_key(),
            first,
        )];
        if first < value - fee {
            payments.push(Payment::new(
                users[rng.gen_range(0..users.len())].public_key(),
                value - fee - first,
            ));
        }
        let prepared = ledger
            .create_transaction(&owner, &[id], &payments, fee, &mut rng)
            .unwrap();
        let unspent_before = ledger.unspent_value();
        ledger.apply_transaction(&prepared.tx).unwrap();
        assert_eq!(ledger.unspent_value(), unspent_before - fee);

        assert!(oracle.consumed.insert(id));
        oracle.owned.remove(&id);
        for (out, k) in prepared.tx.outputs.iter().zip(prepared.output_keys) {
            assert_eq!(out.owner_epk, *k.public_key());
            oracle.owned.insert(out.token_id, (out.value, k));
        }
        oracle.supply -= fee;
        fees += fee;
        ledger.advance_height();
    }
    assert_eq!(ledger.total_supply(), initial - fees);
    assert_eq!(ledger.total_supply(), oracle.supply);
    assert_eq!(
        oracle.owned.values().map(|(v, _)| v).sum::<Amount>(),
        oracle.supply
    );
    let ledger_ids: BTreeSet<TokenId> = ledger.unspent().keys().copied().collect();
    assert_eq!(ledger_ids, oracle.owned.keys().copied().collect());
    assert!(oracle
        .consumed
        .iter()
        .all(|id| ledger.spent_log().contains_key(id)));
    ledger.audit().unwrap();
}

#[test]
fn thousand_payments_use_distinct_owner_keys() {
    let mut rng = seeded(9);
    let alice = key(&mut rng);
    let bob = key(&mut rng);
    let (mut ledger, tokens) = funded(&alice, &[1_000]);
    // Alice pays Bob 1 unit a thousand times, always keeping change in a
    // fresh one-time key she controls.
    let mut change = (tokens[0].clone(), alice.clone());
    let mut keys = BTreeSet::new();
    for _ in 0..999 {
        let (token, owner) = change;
        let payments = [
            Payment::new(bob.public_key(), 1),
            Payment::new(alice.public_key(), token.value - 1),
        ];
        let prepared = ledger
            .create_transaction(&owner, &[token.token_id], &payments, 0, &mut rng)
            .unwrap();
        ledger.apply_transaction(&prepared.tx).unwrap();
        assert!(keys.insert(prepared.tx.outputs[0].owner_epk.clone()));
        change = (
            prepared.tx.outputs[1].clone(),
            prepared.output_keys[1].clone(),
        );
    }
    let (token, owner) = change;
    let prepared = ledger
        .create_transaction(
            &owner,
            &[token.token_id],
            &[Payment::new(bob.public_key(), 1)],
            0,
            &mut rng,
        )
        .unwrap();
    assert!(keys.insert(prepared.tx.outputs[0].owner_epk.clone()));
    assert_eq!(keys.len(), 1000);
}

#[test]
fn pruning_boundary_and_replay_category() {
    let mut rng = seeded(10);
    let alice = key(&mut rng);
    let bob = key(&mut rng);
    let (mut ledger, tokens) = funded(&alice, &[40, 60]);
    let cfg = PruningConfig::new(5).unwrap();

    let empty_before = ledger.clone();
    assert_eq!(ledger.prune(&cfg), 0);
    assert_eq!(ledger, empty_before);

    let spend = ledger
        .create_transaction(
            &alice,
            &[tokens[0].token_id],
            &[Payment::new(bob.public_key(), 40)],
            0,
            &mut rng,
        )
        .unwrap()
        .tx;
    let stored = ledger
        .create_transaction(
            &alice,
            &[tokens[1].token_id],
            &[Payment::new(bob.public_key(), 60)],
            0,
            &mut rng,
        )
        .unwrap()
        .tx;
    let spent_at = ledger.height();
    ledger.apply_transaction(&spend).unwrap();

    // height - spent_at == period: kept.
    for _ in 0..5 {
        ledger.advance_height();
    }
    assert_eq!(ledger.prune(&cfg), 0);
    assert_eq!(ledger.validate_transaction(&spend), Verdict::DoubleSpend);

    // One block later: pruned.
    ledger.advance_height();
    assert_eq!(ledger.height() - spent_at, 6);
    assert_eq!(ledger.prune(&cfg), 1);
    assert_eq!(ledger.validate_transaction(&spend), Verdict::UnknownInput);
    assert_eq!(ledger.validate_transaction(&stored), Verdict::Accept);
    ledger.apply_transaction(&stored).unwrap();
    ledger.audit().unwrap();
}

#[test]
fn apply_is_deterministic() {
    let mut rng = seeded(11);
    let alice = key(&mut rng);
    let bob = key(&mut rng);
    let (ledger, tokens) = funded(&alice, &[10, 20]);
    let tx = ledger
        .create_transaction(
            &alice,
            &[tokens[0].token_id, tokens[1].token_id],
            &[
                Payment::new(bob.public_key(), 25),
                Payment::new(alice.public_key(), 5),
            ],
            0,
            &mut rng,
        )
        .unwrap()
        .tx;
    let mut a = ledger.clone();
    let mut b = ledger.clone();
    a.apply_transaction(&tx).unwrap();
    b.apply_transaction(&tx).unwrap();
    assert_eq!(a.export_snapshot(), b.export_snapshot());
}

#[test]
fn transaction_bytes_roundtrip() {
    let mut rng = seeded(12);
    let alice = key(&mut rng);
    let (ledger, tokens) = funded(&alice, &[10]);
    let tx = ledger
        .create_transaction(
            &alice,
            &[tokens[0].token_id],
            &[Payment::new(alice.public_key(), 10)],
            0,
            &mut rng,
        )
        .unwrap()
        .tx;
    let bytes = tx.to_canonical_bytes();
    assert_eq!(Transaction::from_canonical_bytes(&bytes).unwrap(), tx);
    assert!(Transaction::from_canonical_bytes(&bytes[..bytes.len() - 1]).is_err());
}

#[derive(Debug, Clone)]
enum Op {
    Pay { pick: usize, split: u64 },
    Replay { pick: usize },
    Advance,
    Prune,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (any::<usize>(), any::<u64>()).prop_map(|(pick, split)| Op::Pay { pick, split }),
        2 => any::<usize>().prop_map(|pick| Op::Replay { pick }),
        2 => Just(Op::Advance),
        1 => Just(Op::Prune),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// No token id is consumed twice, whatever mix of spends, replays,
    /// height changes and pruning occurs.
    #[test]
    fn no_token_consumed_twice(ops in prop::collection::vec(op(), 1..40), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let alice = key(&mut rng);
        let (mut ledger, tokens) = funded(&alice, &[1_000, 2_000, 3_000]);
        let mut owned: Vec<(UtxoToken, KeyPair)> = tokens.into_iter().map(|t| (t, alice.clone())).collect();
        let mut applied: Vec<Transaction> = Vec::new();
        let mut consumed = BTreeSet::new();
        let cfg = PruningConfig::new(3).unwrap();
        let supply = ledger.total_supply();
        for op in ops {
            match op {
                Op::Pay { pick, split } if !owned.is_empty() => {
                    let (tok, k) = owned.swap_remove(pick % owned.len());
                    let a = 1 + split % tok.value;
                    let mut pay = vec![Payment::new(alice.public_key(), a)];
                    if a < tok.value {
                        pay.push(Payment::new(alice.public_key(), tok.value - a));
                    }
                    let p = ledger.create_transaction(&k, &[tok.token_id], &pay, 0, &mut rng).unwrap();
                    ledger.apply_transaction(&p.tx).unwrap();
                    prop_assert!(consumed.insert(tok.token_id));
                    owned.extend(p.tx.outputs.iter().cloned().zip(p.output_keys.iter().cloned()));
                    applied.push(p.tx);
                }
                Op::Replay { pick } if !applied.is_empty() => {
                    let tx = &applied[pick % applied.len()];
                    let v = ledger.validate_transaction(tx);
                    prop_assert!(v == Verdict::DoubleSpend || v == Verdict::UnknownInput);
                    prop_assert!(ledger.apply_transaction(tx).is_err());
                }
                Op::Advance => { ledger.advance_height(); }
                Op::Prune => { ledger.prune(&cfg); }
                _ => {}
            }
        }
        prop_assert_eq!(ledger.total_supply(), supply);
        prop_assert!(ledger.audit().is_ok());
    }

    #[test]
    fn snapshot_roundtrip(values in prop::collection::vec(1u64..1_000_000, 1..6), spends in 0usize..4, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let alice = key(&mut rng);
        let (mut ledger, tokens) = funded(&alice, &values);
        for t in tokens.iter().take(spends) {
            let tx = ledger
                .create_transaction(&alice, &[t.token_id], &[Payment::new(alice.public_key(), t.value)], 0, &mut rng)
                .unwrap()
                .tx;
            ledger.apply_transaction(&tx).unwrap();
            ledger.advance_height();
        }
        if let Some(last) = tokens.last() {
            if ledger.get_unspent(&last.token_id).is_some() {
                ledger.lock(&last.token_id).unwrap();
            }
        }
        let bytes = ledger.export_snapshot();
        let back = LedgerState::import_snapshot(&bytes).unwrap();
        prop_assert_eq!(&back, &ledger);
        prop_assert_eq!(back.to_json(), ledger.to_json());
        let json: serde_json::Value = serde_json::from_str(&ledger.to_json()).unwrap();
        prop_assert_eq!(json["total_supply"].as_u64(), Some(ledger.total_supply()));
        prop_assert_eq!(json["spent_log"].as_object().unwrap().len(), ledger.spent_log().len());
    }
}

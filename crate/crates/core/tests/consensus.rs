use qrpl_core::consensus::{
    attack_cost, compute_weight, select_proposer, slash, verify_proposer, ConsensusParams,
    SlashReason, Validator,
};
use qrpl_core::crypto::{hash, KeyPair, SchemeId};
use qrpl_core::fraction::Fraction;
use qrpl_core::rng::seeded;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn validators(weights: &[u64], seed: u64) -> Vec<Validator> {
    let mut rng = seeded(seed);
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            Validator::new(
                i as u32,
                *w,
                KeyPair::generate(SchemeId::Dilithium2, &mut rng),
            )
        })
        .collect()
}

fn frac(s: &str) -> Fraction {
    s.parse().unwrap()
}

/// Pearson statistic and its upper-tail p-value.
fn chi_square(observed: &[u64], expected_share: &[f64]) -> (f64, f64) {
    let n: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected_share)
        .map(|(o, p)| {
            let e = n as f64 * p;
            (*o as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).unwrap();
    (stat, 1.0 - dist.cdf(stat))
}

fn tally(vals: &[Validator], rounds: u64) -> Vec<u64> {
    let params = ConsensusParams::default();
    let beacon = hash(b"selection-test-beacon");
    let mut counts = vec![0u64; vals.len()];
    for round in 0..rounds {
        let sel = select_proposer(vals, &beacon, round, &params).unwrap();
        counts[sel.proposer as usize] += 1;
    }
    counts
}

#[test]
fn weight_and_slash_examples() {
    let params = ConsensusParams::default();
    let mut v = validators(&[100], 1).remove(0);
    v.activity = 50;
    assert_eq!(compute_weight(&v, &params), Fraction::from(125u64));
    v.stake = 1000;
    let (after, event) = slash(&v, &params, SlashReason::DoubleSign, 7);
    assert_eq!(
        (after.stake, event.stake_before, event.stake_after),
        (900, 1000, 900)
    );
}

#[test]
fn selection_frequencies_follow_weights_one_to_three() {
    let vals = validators(&[1, 3], 2);
    let rounds = 100_000u64;
    let counts = tally(&vals, rounds);
    for (c, p) in counts.iter().zip([0.25, 0.75]) {
        let sigma = (rounds as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (*c as f64 - rounds as f64 * p).abs() < 3.0 * sigma,
            "{counts:?}"
        );
    }
    let (stat, p) = chi_square(&counts, &[0.25, 0.75]);
    assert!(p > 0.001, "chi2 {stat} p {p}");
}

#[test]
fn selection_frequencies_follow_unequal_weights() {
    let weights = [1u64, 2, 3, 4, 10];
    let vals = validators(&weights, 3);
    let total: u64 = weights.iter().sum();
    let shares: Vec<f64> = weights.iter().map(|w| *w as f64 / total as f64).collect();
    let counts = tally(&vals, 50_000);
    let (stat, p) = chi_square(&counts, &shares);
    assert!(p > 0.001, "chi2 {stat} p {p} counts {counts:?}");
}

#[test]
fn zero_weight_never_selected_and_selection_verifies() {
    let vals = validators(&[0, 5, 5], 4);
    let params = ConsensusParams::default();
    let beacon = hash(b"b");
    for round in 0..500 {
        let sel = select_proposer(&vals, &beacon, round, &params).unwrap();
        assert_ne!(sel.proposer, 0);
        assert!(verify_proposer(&vals, &beacon, round, &params, &sel));
        let mut forged = sel.clone();
        forged.proposer = 3 - sel.proposer;
        assert!(!verify_proposer(&vals, &beacon, round, &params, &forged));
    }
}

#[test]
fn attack_cost_reference_figures() {
    let params = ConsensusParams {
        alpha_weight: frac("0.5"),
        fee_rate: frac("0.0001"),
        ..ConsensusParams::default()
    };
    let r = attack_cost(100_000_000, &params, frac("0.01"), 5_000).unwrap();
    assert_eq!(r.weight_gain, Fraction::from(1_000_000u64));
    assert_eq!(r.required_activity, Fraction::from(2_000_000u64));
    assert_eq!(r.sham_volume, Fraction::from(20_000_000_000u64));
    assert_eq!(r.fee_cost, Fraction::from(2_000_000u64));
    assert!(!r.profitable);
}

#[test]
fn params_reject_unknown_keys() {
    let err = serde_json::from_str::<ConsensusParams>(r#"{"alpha_weight": 0.5, "beta": 1}"#);
    assert!(err.is_err());
    let ok: ConsensusParams = serde_json::from_str(r#"{"alpha_weight": 0.25}"#).unwrap();
    assert_eq!(ok.alpha_weight, frac("0.25"));
    assert_eq!(ok.epoch_blocks, ConsensusParams::default().epoch_blocks);
}

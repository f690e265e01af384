use proptest::prelude::*;
use qrpl_core::fraction::Fraction;
use qrpl_core::perf::{
    latency_model, percentile, sensitivity_sweep, storage_model, throughput_model,
    throughput_model_serial, CorrelationMode, LatencyParams, StorageParams, StoragePreset,
    ThroughputParams,
};
use statrs::distribution::{ContinuousCDF, Normal};

fn frac(s: &str) -> Fraction {
    s.parse().unwrap()
}

#[test]
fn closed_form_defaults_are_exact() {
    let cf = ThroughputParams::default().closed_form().unwrap();
    assert_eq!(cf.effective_tx_per_block, frac("17"));
    assert_eq!(cf.tps_per_shard, frac("1.7"));
    assert_eq!(cf.tps_global, frac("435.2"));
    assert_eq!(cf.byte_capacity_txs, 39);
}

#[test]
fn independent_intervals_match_normal_quantiles() {
    let params = ThroughputParams::default();
    let r = throughput_model(&params, 42).unwrap();
    let sd = 0.3 * 1.7;
    let shard = Normal::new(1.7, sd).unwrap();
    let global = Normal::new(435.2, sd * 16.0).unwrap();
    let (lo, hi) = (shard.inverse_cdf(0.025), shard.inverse_cdf(0.975));
    assert!((r.ci_per_shard.0 - lo).abs() < 0.02 && (r.ci_per_shard.1 - hi).abs() < 0.02);
    let (glo, ghi) = (global.inverse_cdf(0.025), global.inverse_cdf(0.975));
    assert!((r.ci_global.0 - glo).abs() < 1.5 && (r.ci_global.1 - ghi).abs() < 1.5);
    assert!(
        r.ci_per_shard.0 <= r.sample_mean_per_shard && r.sample_mean_per_shard <= r.ci_per_shard.1
    );
    assert!(r.ci_global.0 <= r.sample_mean_global && r.sample_mean_global <= r.ci_global.1);
}

/// Mean of max(X, 0) for X ~ N(mu, sigma).
fn rectified_normal_mean(mu: f64, sigma: f64) -> f64 {
    let z = mu / sigma;
    let std = Normal::new(0.0, 1.0).unwrap();
    mu * std.cdf(z) + sigma * (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[test]
fn sample_means_converge() {
    for mode in [CorrelationMode::Independent, CorrelationMode::CommonShock] {
        for std_factor in [0.1, 0.3, 0.5] {
            let params = ThroughputParams {
                std_factor,
                correlation_mode: mode,
                num_runs: 2000,
                ..ThroughputParams::default()
            };
            let r = throughput_model(&params, 7).unwrap();
            let sigma = std_factor * 1.7;
            let effective_n = match mode {
                CorrelationMode::Independent => r.per_shard_samples.len(),
                CorrelationMode::CommonShock => r.num_runs as usize,
            } as f64;
            let tol = 3.0 * sigma / effective_n.sqrt();
            let target = rectified_normal_mean(1.7, sigma);
            assert!(
                (r.sample_mean_per_shard - target).abs() < tol,
                "{mode:?} {std_factor}"
            );
            // Truncation bias is negligible up to the default spread.
            if std_factor <= 0.3 {
                assert!(
                    (r.sample_mean_per_shard - 1.7).abs() < tol,
                    "{mode:?} {std_factor}"
                );
            }
            assert!(r.per_shard_samples.iter().all(|v| *v >= 0.0));
        }
    }
}

#[test]
fn parallel_and_serial_agree_bitwise() {
    for mode in [CorrelationMode::Independent, CorrelationMode::CommonShock] {
        let params = ThroughputParams {
            correlation_mode: mode,
            num_runs: 200,
            ..ThroughputParams::default()
        };
        let a = throughput_model(&params, 3).unwrap();
        let b = throughput_model_serial(&params, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples_csv(), b.samples_csv());
        assert_eq!(a, throughput_model(&params, 3).unwrap());
    }
}

#[test]
fn zero_variance_collapses_intervals() {
    let params = ThroughputParams {
        std_factor: 0.0,
        num_runs: 10,
        ..ThroughputParams::default()
    };
    let r = throughput_model(&params, 1).unwrap();
    assert_eq!(r.ci_per_shard, (r.tps_per_shard, r.tps_per_shard));
    assert!((r.ci_global.0 - 435.2).abs() < 1e-9 && (r.ci_global.1 - 435.2).abs() < 1e-9);
}

#[test]
fn invalid_throughput_params_are_domain_errors() {
    for p in [
        ThroughputParams {
            block_time_s: 0.0,
            ..ThroughputParams::default()
        },
        ThroughputParams {
            std_factor: 1.0,
            ..ThroughputParams::default()
        },
        ThroughputParams {
            tx_per_block: -1.0,
            ..ThroughputParams::default()
        },
    ] {
        assert!(throughput_model(&p, 0).is_err());
    }
}

#[test]
fn sweep_rows_follow_their_modes() {
    let base = ThroughputParams {
        num_runs: 300,
        ..ThroughputParams::default()
    };
    let rows = sensitivity_sweep(&base, &[0.4, 0.5], &[10.0, 30.0], 9).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows[..2]
        .iter()
        .all(|r| r.mode == CorrelationMode::CommonShock));
    assert!(rows[2..]
        .iter()
        .all(|r| r.mode == CorrelationMode::Independent));
    assert!((rows[2].tps_global - 217.6).abs() < 1e-9);
    assert!((rows[3].tps_global - 652.8).abs() < 1e-9);
}

/// P(latency < 2 s) by quadrature over the proof time, with the load factor
/// handled through the normal CDF.
fn fraction_under_two_seconds(p: &LatencyParams) -> f64 {
    let load = Normal::new(1.0, p.jitter_std_fraction).unwrap();
    let steps = 20_000;
    let width = p.proof_gen_max_s - p.proof_gen_min_s;
    let mut total = 0.0;
    for (hop, weight) in [
        (0.0, 1.0 - p.cross_shard_fraction),
        (p.cross_shard_s, p.cross_shard_fraction),
    ] {
        let mut acc = 0.0;
        for i in 0..steps {
            let u = p.proof_gen_min_s + width * (i as f64 + 0.5) / steps as f64;
            let base = u + p.propagation_s + p.vote_s + hop;
            acc += load.cdf(2.0 / base);
        }
        total += weight * acc / steps as f64;
    }
    total
}

#[test]
fn latency_matches_analytic_oracle() {
    let p = LatencyParams::default();
    let n = 100_000u64;
    let r = latency_model(&p, n, 42).unwrap();
    let expected_fraction = fraction_under_two_seconds(&p);
    let sigma = (expected_fraction * (1.0 - expected_fraction) / n as f64).sqrt();
    assert!((r.fraction_under_2s - expected_fraction).abs() < 4.0 * sigma);
    // E[max(F,0)] differs from 1 by under 1e-20 at this jitter.
    assert!((p.component_mean_s() - 1.5).abs() < 1e-12);
    let spread = 0.5;
    assert!((r.mean_s - 1.5).abs() < 4.0 * spread / (n as f64).sqrt());
    assert!(r.ci_s.0 < r.mean_s && r.mean_s < r.ci_s.1);
}

#[test]
fn latency_without_cross_shard_is_component_sum() {
    let p = LatencyParams {
        cross_shard_fraction: 0.0,
        ..LatencyParams::default()
    };
    let r = latency_model(&p, 50_000, 5).unwrap();
    assert!((p.component_mean_s() - 0.95).abs() < 1e-12);
    assert!((r.mean_s - 0.95).abs() < 0.01);
    assert!(latency_model(&p, 9_999, 5).is_err());
}

#[test]
fn storage_arithmetic() {
    let r = storage_model(&StorageParams::default()).unwrap();
    let per_shard = 1e6 * 365.0 * 2.74;
    assert_eq!(r.per_shard_bytes_per_year, per_shard);
    assert_eq!(r.network_bytes_per_year, per_shard * 256.0);
    assert_eq!(
        r.compressed_network_bytes_per_year,
        per_shard * 256.0 * 0.39
    );
    assert!((r.per_shard_gb_per_year - 1.0).abs() < 0.02);
    assert!((r.network_gb_per_year - 256.0).abs() < 256.0 * 0.02);
    assert!((r.compressed_network_gb_per_year - 100.0).abs() < 2.0);

    let zero = storage_model(&StorageParams {
        tx_per_day_per_shard: 0.0,
        ..StorageParams::default()
    })
    .unwrap();
    assert_eq!(zero.network_bytes_per_year, 0.0);

    let physical = storage_model(&StorageParams::preset(StoragePreset::Physical)).unwrap();
    assert!(physical.per_shard_gb_per_year > 30_000.0);
}

proptest! {
    #[test]
    fn closed_form_identities(tx in 1u32..200, reduction_pct in 1u32..=100, block in 10u32..=20, shards in 1u32..2048) {
        let params = ThroughputParams {
            tx_per_block: f64::from(tx),
            cross_shard_reduction: f64::from(reduction_pct) / 100.0,
            block_time_s: f64::from(block),
            shards,
            ..ThroughputParams::default()
        };
        let cf = params.closed_form().unwrap();
        let per_shard = Fraction::new(i128::from(tx) * i128::from(reduction_pct), 100 * i128::from(block)).unwrap();
        prop_assert_eq!(cf.tps_per_shard, per_shard);
        prop_assert_eq!(cf.tps_global, per_shard * Fraction::from(u64::from(shards)));
    }

    #[test]
    fn percentile_is_monotone(mut xs in prop::collection::vec(-1e6f64..1e6, 1..200), a in 0.0f64..100.0, b in 0.0f64..100.0) {
        xs.sort_by(f64::total_cmp);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(percentile(&xs, lo) <= percentile(&xs, hi));
        prop_assert_eq!(percentile(&xs, 0.0), xs[0]);
        prop_assert_eq!(percentile(&xs, 100.0), xs[xs.len() - 1]);
    }
}

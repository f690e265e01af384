//! Throughput, latency and storage models.
//!
//! Throughput is a block-level Monte Carlo over per-shard TPS drawn from a
//! normal distribution truncated at zero. Two correlation modes are offered:
//! shards vary independently, or all shards share one common shock per run.
//! Runs use streams derived from `(seed, run index)`, so parallel and serial
//! evaluation give identical results.

use rand_distr::{Bernoulli, Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fraction::Fraction;
use crate::rng;

/// Estimated energy per transaction, reported as a fixed figure.
pub const ENERGY_KWH_PER_TX: f64 = 0.000_002;
pub const BYTES_PER_GB: f64 = 1e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerfError {
    #[error("parameter {name} = {value} out of domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

fn domain(name: &'static str, value: f64, reason: &'static str) -> PerfError {
    PerfError::Domain {
        name,
        value,
        reason,
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<(), PerfError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(domain(name, value, "must be positive"))
    }
}

/// Linear-interpolation percentile of sorted data, `p` in [0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationMode {
    /// Every shard draws its own TPS.
    #[default]
    Independent,
    /// One standard-normal draw per run moves all shards together.
    CommonShock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThroughputParams {
    pub block_time_s: f64,
    pub avg_pqc_sig_kb: f64,
    pub avg_zkp_kb: f64,
    pub other_tx_kb: f64,
    pub block_size_limit_kb: f64,
    pub tx_per_block: f64,
    pub cross_shard_reduction: f64,
    pub shards: u32,
    pub num_runs: u32,
    pub std_factor: f64,
    pub correlation_mode: CorrelationMode,
}

impl Default for ThroughputParams {
    fn default() -> Self {
        ThroughputParams {
            block_time_s: 10.0,
            avg_pqc_sig_kb: 2.5,
            avg_zkp_kb: 100.0,
            other_tx_kb: 1.0,
            block_size_limit_kb: 4096.0,
            tx_per_block: 20.0,
            cross_shard_reduction: 0.85,
            shards: 256,
            num_runs: 1000,
            std_factor: 0.3,
            correlation_mode: CorrelationMode::Independent,
        }
    }
}

/// Closed-form throughput in exact arithmetic over the decimal parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClosedForm {
    pub effective_tx_per_block: Fraction,
    pub tps_per_shard: Fraction,
    pub tps_global: Fraction,
    /// Transactions that fit in a block by size alone.
    pub byte_capacity_txs: i128,
}

impl ThroughputParams {
    pub fn validate(&self) -> Result<(), PerfError> {
        require_positive("block_time_s", self.block_time_s)?;
        require_positive("avg_pqc_sig_kb", self.avg_pqc_sig_kb)?;
        require_positive("avg_zkp_kb", self.avg_zkp_kb)?;
        require_positive("other_tx_kb", self.other_tx_kb)?;
        require_positive("block_size_limit_kb", self.block_size_limit_kb)?;
        require_positive("tx_per_block", self.tx_per_block)?;
        require_positive("cross_shard_reduction", self.cross_shard_reduction)?;
        require_positive("shards", f64::from(self.shards))?;
        require_positive("num_runs", f64::from(self.num_runs))?;
        if !(self.std_factor.is_finite() && (0.0..1.0).contains(&self.std_factor)) {
            return Err(domain("std_factor", self.std_factor, "must be in [0, 1)"));
        }
        if self.cross_shard_reduction > 1.0 {
            return Err(domain(
                "cross_shard_reduction",
                self.cross_shard_reduction,
                "must not exceed 1",
            ));
        }
        Ok(())
    }

    pub fn closed_form(&self) -> Result<ClosedForm, PerfError> {
        self.validate()?;
        let exact =
            |name, v: f64| Fraction::from_f64(v).map_err(|_| domain(name, v, "not representable"));
        let effective = exact("tx_per_block", self.tx_per_block)?
            * exact("cross_shard_reduction", self.cross_shard_reduction)?;
        let per_shard = effective
            .checked_div(exact("block_time_s", self.block_time_s)?)
            .map_err(|_| domain("block_time_s", self.block_time_s, "division failed"))?;
        let tx_kb = exact("avg_pqc_sig_kb", self.avg_pqc_sig_kb)?
            + exact("avg_zkp_kb", self.avg_zkp_kb)?
            + exact("other_tx_kb", self.other_tx_kb)?;
        let capacity = exact("block_size_limit_kb", self.block_size_limit_kb)?
            .checked_div(tx_kb)
            .map_err(|_| domain("avg_zkp_kb", self.avg_zkp_kb, "division failed"))?;
        Ok(ClosedForm {
            effective_tx_per_block: effective,
            tps_per_shard: per_shard,
            tps_global: per_shard * Fraction::from(u64::from(self.shards)),
            byte_capacity_txs: capacity.floor(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub mode: CorrelationMode,
    pub std_factor: f64,
    pub tx_per_block: f64,
    pub num_runs: u32,
    pub shards: u32,
    /// Closed-form values.
    pub tps_per_shard: f64,
    pub tps_global: f64,
    pub sample_mean_per_shard: f64,
    pub sample_mean_global: f64,
    /// 2.5th and 97.5th percentiles.
    pub ci_per_shard: (f64, f64),
    pub ci_global: (f64, f64),
    /// 15.87th and 84.13th percentiles, the one-sigma band.
    pub band_per_shard: (f64, f64),
    pub band_global: (f64, f64),
    /// Per-shard samples, run-major.
    #[serde(skip)]
    pub per_shard_samples: Vec<f64>,
    #[serde(skip)]
    pub global_samples: Vec<f64>,
}

impl SimResult {
    /// `run,shard,tps` rows of the retained per-shard samples.
    pub fn samples_csv(&self) -> String {
        let mut out = String::from("run,shard,tps\n");
        let shards = self.shards as usize;
        for (i, v) in self.per_shard_samples.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", i / shards, i % shards, v));
        }
        out
    }
}

const SIGMA_LO: f64 = 15.865_525_393_145_7;
const SIGMA_HI: f64 = 84.134_474_606_854_3;

fn draw_run(params: &ThroughputParams, mean_tps: f64, seed: u64, run: u32) -> Vec<f64> {
    let std = params.std_factor * mean_tps;
    let mut rng = rng::derive(seed, "throughput-run", u64::from(run));
    let shards = params.shards as usize;
    if std == 0.0 {
        return vec![mean_tps; shards];
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    match params.correlation_mode {
        CorrelationMode::Independent => (0..shards)
            .map(|_| (mean_tps + std * normal.sample(&mut rng)).max(0.0))
            .collect(),
        CorrelationMode::CommonShock => {
            let v = (mean_tps + std * normal.sample(&mut rng)).max(0.0);
            vec![v; shards]
        }
    }
}

fn run_throughput(
    params: &ThroughputParams,
    seed: u64,
    parallel: bool,
) -> Result<SimResult, PerfError> {
    let closed = params.closed_form()?;
    let mean_tps = closed.tps_per_shard.to_f64();
    let runs: Vec<Vec<f64>> = if parallel {
        (0..params.num_runs)
            .into_par_iter()
            .map(|r| draw_run(params, mean_tps, seed, r))
            .collect()
    } else {
        (0..params.num_runs)
            .map(|r| draw_run(params, mean_tps, seed, r))
            .collect()
    };
    let global_samples: Vec<f64> = runs.iter().map(|r| r.iter().sum()).collect();
    let per_shard_samples: Vec<f64> = runs.into_iter().flatten().collect();
    let pooled = sorted(&per_shard_samples);
    let global = sorted(&global_samples);
    Ok(SimResult {
        mode: params.correlation_mode,
        std_factor: params.std_factor,
        tx_per_block: params.tx_per_block,
        num_runs: params.num_runs,
        shards: params.shards,
        tps_per_shard: mean_tps,
        tps_global: closed.tps_global.to_f64(),
        sample_mean_per_shard: mean(&per_shard_samples),
        sample_mean_global: mean(&global_samples),
        ci_per_shard: (percentile(&pooled, 2.5), percentile(&pooled, 97.5)),
        ci_global: (percentile(&global, 2.5), percentile(&global, 97.5)),
        band_per_shard: (percentile(&pooled, SIGMA_LO), percentile(&pooled, SIGMA_HI)),
        band_global: (percentile(&global, SIGMA_LO), percentile(&global, SIGMA_HI)),
        per_shard_samples,
        global_samples,
    })
}

/// Monte Carlo throughput, with runs evaluated in parallel.
pub fn throughput_model(params: &ThroughputParams, seed: u64) -> Result<SimResult, PerfError> {
    run_throughput(params, seed, true)
}

/// Same as [`throughput_model`] on one thread.
pub fn throughput_model_serial(
    params: &ThroughputParams,
    seed: u64,
) -> Result<SimResult, PerfError> {
    run_throughput(params, seed, false)
}

/// Evaluates the std-factor grid in common-shock mode and the tx-per-block
/// grid in the base mode. Each row reuses `seed`.
pub fn sensitivity_sweep(
    base: &ThroughputParams,
    std_factors: &[f64],
    tx_per_block_values: &[f64],
    seed: u64,
) -> Result<Vec<SimResult>, PerfError> {
    let std_rows = std_factors.iter().map(|&std_factor| ThroughputParams {
        std_factor,
        correlation_mode: CorrelationMode::CommonShock,
        ..*base
    });
    let tx_rows = tx_per_block_values
        .iter()
        .map(|&tx_per_block| ThroughputParams {
            tx_per_block,
            ..*base
        });
    std_rows
        .chain(tx_rows)
        .map(|p| throughput_model(&p, seed))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyParams {
    pub proof_gen_min_s: f64,
    pub proof_gen_max_s: f64,
    pub propagation_s: f64,
    pub vote_s: f64,
    pub cross_shard_s: f64,
    /// Share of transactions that cross shards.
    pub cross_shard_fraction: f64,
    /// Standard deviation of the shared per-transaction load factor.
    pub jitter_std_fraction: f64,
}

/// Makes component means sum to 1.5 s: `0.35 + 0.3 + 0.3 + f * 0.7 = 1.5`.
pub const CALIBRATED_CROSS_SHARD_FRACTION: f64 = 0.55 / 0.7;

impl Default for LatencyParams {
    fn default() -> Self {
        LatencyParams {
            proof_gen_min_s: 0.2,
            proof_gen_max_s: 0.5,
            propagation_s: 0.3,
            vote_s: 0.3,
            cross_shard_s: 0.7,
            cross_shard_fraction: CALIBRATED_CROSS_SHARD_FRACTION,
            jitter_std_fraction: 0.2,
        }
    }
}

impl LatencyParams {
    pub fn validate(&self) -> Result<(), PerfError> {
        for (name, v) in [
            ("proof_gen_min_s", self.proof_gen_min_s),
            ("propagation_s", self.propagation_s),
            ("vote_s", self.vote_s),
            ("cross_shard_s", self.cross_shard_s),
            ("jitter_std_fraction", self.jitter_std_fraction),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(domain(name, v, "must be non-negative"));
            }
        }
        if !(self.proof_gen_max_s.is_finite() && self.proof_gen_max_s >= self.proof_gen_min_s) {
            return Err(domain(
                "proof_gen_max_s",
                self.proof_gen_max_s,
                "must be at least proof_gen_min_s",
            ));
        }
        if !(0.0..=1.0).contains(&self.cross_shard_fraction) {
            return Err(domain(
                "cross_shard_fraction",
                self.cross_shard_fraction,
                "must be in [0, 1]",
            ));
        }
        Ok(())
    }

    /// Sum of component means.
    pub fn component_mean_s(&self) -> f64 {
        (self.proof_gen_min_s + self.proof_gen_max_s) / 2.0
            + self.propagation_s
            + self.vote_s
            + self.cross_shard_fraction * self.cross_shard_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub n_samples: u64,
    pub mean_s: f64,
    pub ci_s: (f64, f64),
    pub fraction_under_2s: f64,
    pub component_mean_s: f64,
    pub cross_shard_fraction: f64,
    pub calibration: String,
}

pub const MIN_LATENCY_SAMPLES: u64 = 10_000;
const LATENCY_CHUNK: u64 = 10_000;

/// Per-transaction latency: a shared load factor `max(N(1, jitter), 0)`
/// scales the sum of a uniform proof time, propagation, vote, and a
/// cross-shard hop taken with probability `cross_shard_fraction`.
pub fn latency_model(
    params: &LatencyParams,
    n_samples: u64,
    seed: u64,
) -> Result<LatencyReport, PerfError> {
    params.validate()?;
    if n_samples < MIN_LATENCY_SAMPLES {
        return Err(domain(
            "n_samples",
            n_samples as f64,
            "need at least 10^4 samples",
        ));
    }
    let chunks = n_samples.div_ceil(LATENCY_CHUNK);
    let samples: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = rng::derive(seed, "latency", c);
            let len = LATENCY_CHUNK.min(n_samples - c * LATENCY_CHUNK);
            let proof = Uniform::new_inclusive(params.proof_gen_min_s, params.proof_gen_max_s);
            let cross = Bernoulli::new(params.cross_shard_fraction).expect("validated probability");
            let load = Normal::new(1.0, params.jitter_std_fraction).expect("validated std");
            (0..len)
                .map(|_| {
                    let hop = if cross.sample(&mut rng) {
                        params.cross_shard_s
                    } else {
                        0.0
                    };
                    let base = proof.sample(&mut rng) + params.propagation_s + params.vote_s + hop;
                    let factor: f64 = load.sample(&mut rng);
                    base * factor.max(0.0)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let s = sorted(&samples);
    let under = samples.iter().filter(|&&v| v < 2.0).count();
    let component = params.component_mean_s();
    Ok(LatencyReport {
        n_samples,
        mean_s: mean(&samples),
        ci_s: (percentile(&s, 2.5), percentile(&s, 97.5)),
        fraction_under_2s: under as f64 / n_samples as f64,
        component_mean_s: component,
        cross_shard_fraction: params.cross_shard_fraction,
        calibration: format!(
            "cross_shard_fraction {:.4} gives component means summing to {:.3} s",
            params.cross_shard_fraction, component
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StorageParams {
    pub tx_per_day_per_shard: f64,
    pub shards: u32,
    pub retained_bytes_per_tx: f64,
    pub compression_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoragePreset {
    /// Retained bytes per transaction back-computed from a target of
    /// one gigabyte per shard-year.
    Calibrated,
    /// Every transaction retained at its full nominal size.
    Physical,
}

impl StorageParams {
    pub fn preset(preset: StoragePreset) -> Self {
        let retained_bytes_per_tx = match preset {
            StoragePreset::Calibrated => 2.74,
            StoragePreset::Physical => (2.5 + 100.0 + 1.0) * 1024.0,
        };
        StorageParams {
            tx_per_day_per_shard: 1_000_000.0,
            shards: 256,
            retained_bytes_per_tx,
            compression_ratio: 0.39,
        }
    }
}

impl Default for StorageParams {
    fn default() -> Self {
        StorageParams::preset(StoragePreset::Calibrated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StorageReport {
    pub per_shard_bytes_per_year: f64,
    pub network_bytes_per_year: f64,
    pub compressed_network_bytes_per_year: f64,
    pub per_shard_gb_per_year: f64,
    pub network_gb_per_year: f64,
    pub compressed_network_gb_per_year: f64,
    pub energy_kwh_per_tx: f64,
}

pub fn storage_model(params: &StorageParams) -> Result<StorageReport, PerfError> {
    if !(params.tx_per_day_per_shard.is_finite() && params.tx_per_day_per_shard >= 0.0) {
        return Err(domain(
            "tx_per_day_per_shard",
            params.tx_per_day_per_shard,
            "must be non-negative",
        ));
    }
    require_positive("shards", f64::from(params.shards))?;
    require_positive("retained_bytes_per_tx", params.retained_bytes_per_tx)?;
    if !(params.compression_ratio > 0.0 && params.compression_ratio <= 1.0) {
        return Err(domain(
            "compression_ratio",
            params.compression_ratio,
            "must be in (0, 1]",
        ));
    }
    let per_shard = params.tx_per_day_per_shard * 365.0 * params.retained_bytes_per_tx;
    let network = per_shard * f64::from(params.shards);
    let compressed = network * params.compression_ratio;
    Ok(StorageReport {
        per_shard_bytes_per_year: per_shard,
        network_bytes_per_year: network,
        compressed_network_bytes_per_year: compressed,
        per_shard_gb_per_year: per_shard / BYTES_PER_GB,
        network_gb_per_year: network / BYTES_PER_GB,
        compressed_network_gb_per_year: compressed / BYTES_PER_GB,
        energy_kwh_per_tx: ENERGY_KWH_PER_TX,
    })
}

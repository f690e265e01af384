use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::Serialize;

use super::NetworkError;
use crate::consensus::{ShardId, ValidatorId};
use crate::crypto::{hash_fields, HashDigest};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShardAssignment {
    pub epoch: u64,
    pub shard_count: u16,
    pub mapping: BTreeMap<ValidatorId, ShardId>,
}

impl ShardAssignment {
    pub fn shard_of(&self, id: ValidatorId) -> Option<ShardId> {
        self.mapping.get(&id).copied()
    }

    pub fn members(&self, shard: ShardId) -> Vec<ValidatorId> {
        self.mapping
            .iter()
            .filter(|(_, s)| **s == shard)
            .map(|(v, _)| *v)
            .collect()
    }

    pub fn shard_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; usize::from(self.shard_count)];
        for s in self.mapping.values() {
            sizes[usize::from(*s)] += 1;
        }
        sizes
    }
}

/// Shuffles the sorted validator ids with an RNG seeded from the beacon and
/// epoch, then deals them round-robin into shards.
pub fn assign_validators(
    validators: &[ValidatorId],
    beacon_value: &HashDigest,
    epoch: u64,
    shard_count: u16,
) -> Result<ShardAssignment, NetworkError> {
    if shard_count == 0 {
        return Err(NetworkError::Config("shard_count must be positive".into()));
    }
    let unique: BTreeSet<ValidatorId> = validators.iter().copied().collect();
    if unique.len() != validators.len() {
        return Err(NetworkError::Config("duplicate validator id".into()));
    }
    if unique.len() < usize::from(shard_count) {
        return Err(NetworkError::Config(format!(
            "{} validators cannot cover {shard_count} shards",
            unique.len()
        )));
    }
    let mut order: Vec<ValidatorId> = unique.into_iter().collect();
    let seed = hash_fields("qrpl/assignment", |e| {
        e.nested(beacon_value).u64(epoch);
    });
    order.shuffle(&mut SimRng::from_seed(seed.0));
    let mapping = order
        .iter()
        .enumerate()
        .map(|(i, v)| (*v, (i % usize::from(shard_count)) as ShardId))
        .collect();
    Ok(ShardAssignment {
        epoch,
        shard_count,
        mapping,
    })
}

/// Outcome of repeatedly reassigning a validator set that contains a fixed
/// group of adversaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaptureReport {
    pub epochs: u64,
    /// Epochs in which the adversary held at least a third of some shard.
    pub epochs_with_capture: u64,
    pub capture_fraction: f64,
    pub mean_captured_shards: f64,
}

/// Adversaries are validator ids `0..adversaries`; each epoch draws a fresh
/// beacon value from `seed`.
pub fn capture_frequency(
    validator_count: u32,
    adversaries: u32,
    shard_count: u16,
    epochs: u64,
    seed: u64,
) -> Result<CaptureReport, NetworkError> {
    let ids: Vec<ValidatorId> = (0..validator_count).collect();
    let mut with_capture = 0u64;
    let mut captured_total = 0u64;
    for epoch in 0..epochs {
        let beacon = hash_fields("qrpl/capture-epoch", |e| {
            e.u64(seed).u64(epoch);
        });
        let a = assign_validators(&ids, &beacon, epoch, shard_count)?;
        let mut adv = vec![0usize; usize::from(shard_count)];
        for v in 0..adversaries {
            if let Some(s) = a.shard_of(v) {
                adv[usize::from(s)] += 1;
            }
        }
        let captured = a
            .shard_sizes()
            .iter()
            .zip(&adv)
            .filter(|(size, held)| 3 * **held >= **size && **held > 0)
            .count() as u64;
        captured_total += captured;
        with_capture += u64::from(captured > 0);
    }
    let n = epochs.max(1) as f64;
    Ok(CaptureReport {
        epochs,
        epochs_with_capture: with_capture,
        capture_fraction: with_capture as f64 / n,
        mean_captured_shards: captured_total as f64 / n,
    })
}

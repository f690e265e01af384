use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use tracing::debug;

use super::{
    assign_validators, beacon_next, produce_block, swap_complete, swap_initiate, swap_relay,
    swap_timeout, to_micros, BeaconChain, BlockLimits, CrossShardSwap, NetworkConfig, NetworkError,
    ShardAssignment, ShardState, SwapRelay,
};
use crate::consensus::{
    accrue_activity, adversary_shares, reset_epoch_activity, select_proposer, slash,
    ConsensusParams, FeeTotalStatement, ShardId, SlashReason, Validator, ValidatorId,
};
use crate::crypto::{hash, hash_fields, prove, HashDigest, KeyPair, ProverMode, SchemeId};
use crate::ledger::{
    build_transaction, Amount, FeePolicy, LedgerState, Payment, Transaction, UtxoToken,
};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub network: NetworkConfig,
    pub consensus: ConsensusParams,
    pub validators: u32,
    /// Blocks produced by every shard.
    pub blocks: u64,
    pub max_txs_per_block: usize,
    pub users_per_shard: u32,
    pub tokens_per_user: u32,
    pub token_value: Amount,
    /// Payment attempts generated per shard after each block.
    pub offered_txs_per_block: u32,
    /// Share of payment attempts sent to a user on another shard.
    pub cross_shard_fraction: f64,
    /// Per-block probability of resubmitting an already included transaction.
    pub replay_probability: f64,
    pub adversary_fraction: f64,
    /// Probability that an adversarial proposer double-signs its block.
    pub double_sign_probability: f64,
    pub validator_stake: Amount,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            network: NetworkConfig {
                shard_count: 4,
                ..NetworkConfig::default()
            },
            consensus: ConsensusParams {
                epoch_blocks: 20,
                ..ConsensusParams::default()
            },
            validators: 16,
            blocks: 100,
            max_txs_per_block: 20,
            users_per_shard: 8,
            tokens_per_user: 4,
            token_value: 1_000_000,
            offered_txs_per_block: 12,
            cross_shard_fraction: 0.2,
            replay_probability: 0.1,
            adversary_fraction: 0.25,
            double_sign_probability: 0.05,
            validator_stake: 1_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        self.network.validate()?;
        self.consensus.validate()?;
        let bad = |m: String| Err(NetworkError::Config(m));
        if self.validators < u32::from(self.network.shard_count) {
            return bad(format!(
                "{} validators cannot cover {} shards",
                self.validators, self.network.shard_count
            ));
        }
        if self.users_per_shard == 0 || self.tokens_per_user == 0 || self.token_value == 0 {
            return bad("users_per_shard, tokens_per_user and token_value must be positive".into());
        }
        for (name, p) in [
            ("cross_shard_fraction", self.cross_shard_fraction),
            ("replay_probability", self.replay_probability),
            ("adversary_fraction", self.adversary_fraction),
            ("double_sign_probability", self.double_sign_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1]"));
            }
        }
        let genesis = u128::from(self.network.shard_count)
            * u128::from(self.users_per_shard)
            * u128::from(self.tokens_per_user)
            * u128::from(self.token_value);
        if genesis > u128::from(Amount::MAX) {
            return bad("genesis supply overflows".into());
        }
        Ok(())
    }
}

/// One line of the exported event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time_us: u64,
    pub shard: ShardId,
    pub kind: String,
    pub digest: HashDigest,
}

pub fn events_to_jsonl(events: &[EventRecord]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub shards: u16,
    pub validators: u32,
    pub blocks_per_shard: u64,
    pub blocks_produced: u64,
    pub txs_included: u64,
    pub txs_rejected: BTreeMap<String, u64>,
    pub replays_injected: u64,
    pub replays_rejected: u64,
    pub swaps_initiated: u64,
    pub swaps_completed: u64,
    pub swaps_refunded: u64,
    pub relays_dropped: u64,
    pub stale_swap_attempts: u64,
    pub atomicity_violations: u64,
    pub max_swap_latency_us: Option<u64>,
    pub epochs: u64,
    pub slashings: u64,
    pub adversary_stake_share: f64,
    pub adversary_weight_share: f64,
    pub adversary_bound: f64,
    pub genesis_supply: Amount,
    pub final_supply: Amount,
    pub fees_burned: Amount,
    /// Scheduler events processed; one event can emit several log records.
    pub events: u64,
    pub audits_passed: u64,
    pub min_block_interval_us: Option<u64>,
    pub max_block_interval_us: Option<u64>,
    pub event_log_digest: HashDigest,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub report: SimReport,
    pub events: Vec<EventRecord>,
    pub shards: Vec<ShardState>,
    pub swaps: Vec<CrossShardSwap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Epoch { index: u64 },
    SwapRelayArrive { swap: usize },
    SwapSettle { swap: usize },
    SwapDeadline { swap: usize },
    Block { shard: ShardId, index: u64 },
}

impl EventKind {
    /// Same-time ordering: epoch changes first, then swap messages, then
    /// blocks.
    fn class(&self) -> u8 {
        match self {
            EventKind::Epoch { .. } => 0,
            EventKind::SwapRelayArrive { .. }
            | EventKind::SwapSettle { .. }
            | EventKind::SwapDeadline { .. } => 1,
            EventKind::Block { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Scheduled {
    time_us: u64,
    seq: u64,
    kind: EventKind,
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time_us, other.kind.class(), other.seq).cmp(&(
            self.time_us,
            self.kind.class(),
            self.seq,
        ))
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

type Coin = (UtxoToken, KeyPair);

struct User {
    key: KeyPair,
    coins: Vec<Coin>,
    epoch_fees: Vec<Amount>,
}

struct Pending {
    sender: usize,
    recipient: usize,
    spent: Coin,
    output_keys: Vec<KeyPair>,
}

struct SwapEntry {
    swap: CrossShardSwap,
    relay: SwapRelay,
    sender: usize,
    recipient: usize,
    recipient_key: KeyPair,
    sender_key: KeyPair,
    terminal_transitions: u32,
}

struct Sim {
    config: SimConfig,
    rng: SimRng,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    beacon: BeaconChain,
    assignment: ShardAssignment,
    validators: Vec<Validator>,
    adversaries: BTreeSet<ValidatorId>,
    shards: Vec<ShardState>,
    mempools: Vec<VecDeque<Transaction>>,
    pending: Vec<BTreeMap<HashDigest, Pending>>,
    last_included: Vec<Option<Transaction>>,
    users: Vec<User>,
    users_by_shard: Vec<Vec<usize>>,
    swaps: Vec<SwapEntry>,
    fee_policy: FeePolicy,
    limits: BlockLimits,
    last_block_us: Vec<Option<u64>>,
    genesis_supply: Amount,
    events: Vec<EventRecord>,
    report: SimReport,
}

/// Runs the full multi-shard simulation. The result is a pure function of
/// `(config, seed)`.
pub fn run_simulation(config: &SimConfig, seed: u64) -> Result<SimOutcome, NetworkError> {
    config.validate()?;
    let mut sim = Sim::new(config.clone(), seed)?;
    sim.run()?;
    Ok(sim.finish())
}

impl Sim {
    fn new(config: SimConfig, seed: u64) -> Result<Self, NetworkError> {
        let shard_count = config.network.shard_count;
        let mut rng = rng::derive(seed, "sim", 0);
        let validators: Vec<Validator> = (0..config.validators)
            .map(|id| {
                let mut krng = rng::derive(seed, "validator-key", u64::from(id));
                Validator::new(
                    id,
                    config.validator_stake,
                    KeyPair::generate(SchemeId::Dilithium2, &mut krng),
                )
            })
            .collect();
        let mut ids: Vec<ValidatorId> = validators.iter().map(|v| v.id).collect();
        ids.shuffle(&mut rng);
        let adversary_count =
            (config.adversary_fraction * f64::from(config.validators)).round() as usize;
        let adversaries = ids[..adversary_count].iter().copied().collect();

        let beacon = BeaconChain::genesis(seed);
        let ids: Vec<ValidatorId> = validators.iter().map(|v| v.id).collect();
        let assignment = assign_validators(&ids, &beacon.value, 0, shard_count)?;

        let mut shards: Vec<ShardState> = (0..shard_count)
            .map(|s| ShardState::new(s, LedgerState::new()))
            .collect();
        let mut users = Vec::new();
        let mut users_by_shard = vec![Vec::new(); usize::from(shard_count)];
        let mut genesis_supply: Amount = 0;
        for shard in 0..shard_count {
            for _ in 0..config.users_per_shard {
                let index = users.len();
                let mut urng = rng::derive(seed, "user", index as u64);
                let key = KeyPair::generate(SchemeId::Dilithium2, &mut urng);
                let mut coins = Vec::new();
                for _ in 0..config.tokens_per_user {
                    let coin_key = KeyPair::generate(SchemeId::Dilithium2, &mut urng);
                    let token = UtxoToken::for_owner(&coin_key, config.token_value, 0);
                    shards[usize::from(shard)].ledger.mint(token.clone())?;
                    genesis_supply += config.token_value;
                    coins.push((token, coin_key));
                }
                users_by_shard[usize::from(shard)].push(index);
                users.push(User {
                    key,
                    coins,
                    epoch_fees: Vec::new(),
                });
            }
        }

        let limits = BlockLimits {
            max_txs: config.max_txs_per_block,
            ..BlockLimits::default()
        };
        let fee_policy = FeePolicy {
            rate: config.consensus.fee_rate,
        };
        let n = usize::from(shard_count);
        let report = SimReport {
            seed,
            shards: shard_count,
            validators: config.validators,
            blocks_per_shard: config.blocks,
            blocks_produced: 0,
            txs_included: 0,
            txs_rejected: BTreeMap::new(),
            replays_injected: 0,
            replays_rejected: 0,
            swaps_initiated: 0,
            swaps_completed: 0,
            swaps_refunded: 0,
            relays_dropped: 0,
            stale_swap_attempts: 0,
            atomicity_violations: 0,
            max_swap_latency_us: None,
            epochs: 0,
            slashings: 0,
            adversary_stake_share: 0.0,
            adversary_weight_share: 0.0,
            adversary_bound: config.consensus.adversary_bound.to_f64(),
            genesis_supply,
            final_supply: genesis_supply,
            fees_burned: 0,
            events: 0,
            audits_passed: 0,
            min_block_interval_us: None,
            max_block_interval_us: None,
            event_log_digest: HashDigest::default(),
        };
        let mut sim = Sim {
            config,
            rng,
            queue: BinaryHeap::new(),
            seq: 0,
            beacon,
            assignment,
            validators,
            adversaries,
            shards,
            mempools: vec![VecDeque::new(); n],
            pending: (0..n).map(|_| BTreeMap::new()).collect(),
            last_included: vec![None; n],
            users,
            users_by_shard,
            swaps: Vec::new(),
            fee_policy,
            limits,
            last_block_us: vec![None; n],
            genesis_supply,
            events: Vec::new(),
            report,
        };
        sim.apply_assignment();
        Ok(sim)
    }

    fn schedule(&mut self, time_us: u64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Scheduled {
            time_us,
            seq: self.seq,
            kind,
        });
    }

    fn log(&mut self, time_us: u64, shard: ShardId, kind: &str, digest: HashDigest) {
        self.events.push(EventRecord {
            time_us,
            shard,
            kind: kind.to_string(),
            digest,
        });
    }

    fn apply_assignment(&mut self) {
        for v in &mut self.validators {
            v.shard = self.assignment.shard_of(v.id).unwrap_or(0);
        }
    }

    fn jitter_us(&mut self) -> u64 {
        let j = self.config.network.delay_jitter_s;
        if j > 0.0 {
            to_micros(self.rng.gen_range(0.0..=j))
        } else {
            0
        }
    }

    fn run(&mut self) -> Result<(), NetworkError> {
        let block_us = self.config.network.block_time_us();
        for shard in 0..self.config.network.shard_count {
            self.generate_workload(shard, 0)?;
        }
        for index in 1..=self.config.blocks {
            let t = index * block_us;
            if index % self.config.consensus.epoch_blocks == 0 {
                self.schedule(t, EventKind::Epoch { index });
            }
            for shard in 0..self.config.network.shard_count {
                self.schedule(t, EventKind::Block { shard, index });
            }
        }
        while let Some(ev) = self.queue.pop() {
            let touched = self.handle(ev)?;
            self.audit_event(&touched)?;
            self.report.events += 1;
        }
        for (i, s) in self.shards.iter().enumerate() {
            s.ledger
                .audit()
                .map_err(|e| NetworkError::AuditFailed(format!("shard {i}: {e}")))?;
        }
        Ok(())
    }

    fn handle(&mut self, ev: Scheduled) -> Result<Vec<ShardId>, NetworkError> {
        let now = ev.time_us;
        match ev.kind {
            EventKind::Epoch { index } => {
                self.epoch_boundary(index, now)?;
                Ok(Vec::new())
            }
            EventKind::Block { shard, index } => {
                self.block_tick(shard, index, now)?;
                Ok(vec![shard])
            }
            EventKind::SwapRelayArrive { swap } => {
                let entry = &mut self.swaps[swap];
                let (source, target, id) =
                    (entry.swap.source, entry.swap.target, entry.swap.swap_id);
                match swap_relay(&mut entry.swap, &entry.relay, now) {
                    Ok(()) => {
                        self.log(now, target, "swap_relayed", id);
                        let delay = to_micros(
                            self.config.network.propagation_delay_s
                                + self.config.network.vote_delay_s,
                        ) + self.jitter_us()
                            + self.jitter_us();
                        self.schedule(now + delay, EventKind::SwapSettle { swap });
                    }
                    Err(NetworkError::StaleSwap(_)) => {
                        self.report.stale_swap_attempts += 1;
                        self.log(now, target, "swap_stale", id);
                    }
                    Err(e) => return Err(e),
                }
                Ok(vec![source, target])
            }
            EventKind::SwapSettle { swap } => {
                let (source, target) = (self.swaps[swap].swap.source, self.swaps[swap].swap.target);
                let (src, tgt) =
                    two_mut(&mut self.shards, usize::from(source), usize::from(target));
                let entry = &mut self.swaps[swap];
                let id = entry.swap.swap_id;
                match swap_complete(
                    &mut entry.swap,
                    &entry.relay,
                    &mut src.ledger,
                    &mut tgt.ledger,
                    now,
                ) {
                    Ok(_) => {
                        entry.terminal_transitions += 1;
                        let coin = (
                            entry.relay.target_output.clone(),
                            entry.recipient_key.clone(),
                        );
                        let recipient = entry.recipient;
                        let latency = now - entry.swap.initiated_us;
                        self.users[recipient].coins.push(coin);
                        self.report.swaps_completed += 1;
                        self.report.max_swap_latency_us =
                            Some(self.report.max_swap_latency_us.unwrap_or(0).max(latency));
                        self.log(now, target, "swap_completed", id);
                    }
                    Err(NetworkError::StaleSwap(_)) => {
                        self.report.stale_swap_attempts += 1;
                        self.log(now, target, "swap_stale", id);
                    }
                    Err(e) => return Err(e),
                }
                Ok(vec![source, target])
            }
            EventKind::SwapDeadline { swap } => {
                let source = self.swaps[swap].swap.source;
                let entry = &mut self.swaps[swap];
                let id = entry.swap.swap_id;
                if swap_timeout(
                    &mut entry.swap,
                    &mut self.shards[usize::from(source)].ledger,
                    now,
                )? {
                    entry.terminal_transitions += 1;
                    let coin = (entry.swap.locked_token.clone(), entry.sender_key.clone());
                    let sender = entry.sender;
                    self.users[sender].coins.push(coin);
                    self.report.swaps_refunded += 1;
                    self.log(now, source, "swap_refunded", id);
                }
                Ok(vec![source])
            }
        }
    }

    fn epoch_boundary(&mut self, index: u64, now: u64) -> Result<(), NetworkError> {
        let epoch = index / self.config.consensus.epoch_blocks;
        while self.beacon.round < index {
            self.beacon = beacon_next(&self.beacon);
        }
        reset_epoch_activity(&mut self.validators);
        for i in 0..self.validators.len() {
            let Some(user) = self.users.get_mut(i) else {
                break;
            };
            let receipts = std::mem::take(&mut user.epoch_fees);
            let fees_paid: Amount = receipts.iter().sum();
            let v = &self.validators[i];
            let statement = FeeTotalStatement {
                validator: v.id,
                epoch: epoch - 1,
                fees_paid,
            };
            let proof = prove(&statement, &receipts[..], ProverMode::Honest, &mut self.rng)?;
            let accrued = accrue_activity(v, fees_paid, epoch - 1, &proof)?;
            self.validators[i] = accrued;
        }
        let ids: Vec<ValidatorId> = self.validators.iter().map(|v| v.id).collect();
        self.assignment = assign_validators(
            &ids,
            &self.beacon.value,
            epoch,
            self.config.network.shard_count,
        )?;
        self.apply_assignment();
        self.report.epochs += 1;
        let digest = hash_fields("qrpl/epoch", |e| {
            e.u64(epoch).nested(&self.beacon.value);
        });
        self.log(now, 0, "epoch", digest);
        Ok(())
    }

    fn block_tick(&mut self, shard: ShardId, index: u64, now: u64) -> Result<(), NetworkError> {
        while self.beacon.round < index {
            self.beacon = beacon_next(&self.beacon);
        }
        let s = usize::from(shard);
        let members: Vec<Validator> = self
            .validators
            .iter()
            .filter(|v| v.shard == shard)
            .cloned()
            .collect();
        let selection = select_proposer(
            &members,
            &self.beacon.value,
            self.beacon.round,
            &self.config.consensus,
        )?;
        let outcome = produce_block(
            &mut self.shards[s],
            &mut self.mempools[s],
            &members,
            selection.proposer,
            &self.beacon,
            &self.config.consensus,
            &self.limits,
            now,
        )?;
        if let Some(prev) = self.last_block_us[s] {
            let gap = now - prev;
            let r = &mut self.report;
            r.min_block_interval_us = Some(r.min_block_interval_us.map_or(gap, |m| m.min(gap)));
            r.max_block_interval_us = Some(r.max_block_interval_us.map_or(gap, |m| m.max(gap)));
        }
        self.last_block_us[s] = Some(now);
        self.report.blocks_produced += 1;
        self.log(now, shard, "block", outcome.block.hash);

        for tx in &outcome.block.transactions {
            let p = self.pending[s].remove(&tx.tx_hash).ok_or_else(|| {
                NetworkError::ProtocolViolation(format!("included unknown tx {}", tx.tx_hash))
            })?;
            let mut keys = p.output_keys.into_iter();
            let mut outputs = tx.outputs.iter();
            if let (Some(out), Some(key)) = (outputs.next(), keys.next()) {
                self.users[p.recipient].coins.push((out.clone(), key));
            }
            if let (Some(out), Some(key)) = (outputs.next(), keys.next()) {
                self.users[p.sender].coins.push((out.clone(), key));
            }
            self.users[p.sender].epoch_fees.push(tx.fee);
            self.report.txs_included += 1;
        }
        if let Some(last) = outcome.block.transactions.last() {
            self.last_included[s] = Some(last.clone());
        }
        for rej in outcome.rejected {
            *self
                .report
                .txs_rejected
                .entry(format!("{:?}", rej.verdict).to_lowercase())
                .or_default() += 1;
            match self.pending[s].remove(&rej.tx.tx_hash) {
                Some(p) => self.users[p.sender].coins.push(p.spent),
                None => self.report.replays_rejected += 1,
            }
            self.log(now, shard, "tx_rejected", rej.tx.tx_hash);
        }

        let proposer_is_adversary = self.adversaries.contains(&selection.proposer);
        if proposer_is_adversary && self.rng.gen_bool(self.config.double_sign_probability) {
            let i = self
                .validators
                .iter()
                .position(|v| v.id == selection.proposer)
                .expect("proposer is a validator");
            let (slashed, event) = slash(
                &self.validators[i],
                &self.config.consensus,
                SlashReason::DoubleSign,
                outcome.block.height,
            );
            self.validators[i] = slashed;
            self.report.slashings += 1;
            let digest = hash(&serde_json::to_vec(&event).expect("event serializes"));
            self.log(now, shard, "slash", digest);
        }

        self.generate_workload(shard, now)
    }

    fn generate_workload(&mut self, shard: ShardId, now: u64) -> Result<(), NetworkError> {
        let s = usize::from(shard);
        let shard_count = self.config.network.shard_count;
        if self.rng.gen_bool(self.config.replay_probability) {
            if let Some(tx) = self.last_included[s].clone() {
                self.mempools[s].push_back(tx);
                self.report.replays_injected += 1;
            }
        }
        for _ in 0..self.config.offered_txs_per_block {
            let local = &self.users_by_shard[s];
            let sender = local[self.rng.gen_range(0..local.len())];
            if self.users[sender].coins.is_empty() {
                continue;
            }
            let coin_index = self.rng.gen_range(0..self.users[sender].coins.len());
            let cross = shard_count > 1 && self.rng.gen_bool(self.config.cross_shard_fraction);
            if cross {
                let mut target = self.rng.gen_range(0..shard_count - 1);
                if target >= shard {
                    target += 1;
                }
                let remote = &self.users_by_shard[usize::from(target)];
                let recipient = remote[self.rng.gen_range(0..remote.len())];
                let coin = self.users[sender].coins.swap_remove(coin_index);
                self.start_swap(shard, target, sender, recipient, coin, now)?;
            } else {
                let recipient = local[self.rng.gen_range(0..local.len())];
                let coin = self.users[sender].coins.swap_remove(coin_index);
                self.submit_transfer(shard, sender, recipient, coin)?;
            }
        }
        Ok(())
    }

    fn submit_transfer(
        &mut self,
        shard: ShardId,
        sender: usize,
        recipient: usize,
        coin: Coin,
    ) -> Result<(), NetworkError> {
        let s = usize::from(shard);
        let value = coin.0.value;
        let amount = self.rng.gen_range(1..=(value / 2).max(1));
        let fee = self.fee_policy.fee_for(amount);
        let change = value - amount - fee;
        let mut payments = vec![Payment::new(self.users[recipient].key.public_key(), amount)];
        if change > 0 {
            payments.push(Payment::new(self.users[sender].key.public_key(), change));
        }
        let prepared = build_transaction(
            std::slice::from_ref(&coin.0),
            &coin.1,
            &payments,
            fee,
            self.shards[s].ledger.height(),
            ProverMode::Honest,
            &mut self.rng,
        )?;
        self.pending[s].insert(
            prepared.tx.tx_hash,
            Pending {
                sender,
                recipient,
                spent: coin,
                output_keys: prepared.output_keys,
            },
        );
        self.mempools[s].push_back(prepared.tx);
        Ok(())
    }

    fn start_swap(
        &mut self,
        source: ShardId,
        target: ShardId,
        sender: usize,
        recipient: usize,
        coin: Coin,
        now: u64,
    ) -> Result<(), NetworkError> {
        let timeout_us = to_micros(self.config.network.swap_timeout_s);
        let recipient_pk = self.users[recipient].key.public_key().clone();
        let init = swap_initiate(
            &mut self.shards[usize::from(source)].ledger,
            source,
            target,
            &coin.0.token_id,
            &coin.1,
            &recipient_pk,
            now,
            timeout_us,
            &mut self.rng,
        )?;
        let index = self.swaps.len();
        let id = init.swap.swap_id;
        let deadline = init.swap.deadline_us;
        debug!(swap = %id, source, target, "swap initiated");
        self.swaps.push(SwapEntry {
            swap: init.swap,
            relay: init.relay,
            sender,
            recipient,
            recipient_key: init.recipient_key,
            sender_key: coin.1,
            terminal_transitions: 0,
        });
        self.report.swaps_initiated += 1;
        self.log(now, source, "swap_initiated", id);
        self.schedule(deadline, EventKind::SwapDeadline { swap: index });
        if self.rng.gen_bool(self.config.network.message_loss) {
            self.report.relays_dropped += 1;
            self.log(now, source, "relay_dropped", id);
        } else {
            let arrive =
                now + to_micros(self.config.network.cross_shard_delay_s) + self.jitter_us();
            self.schedule(arrive, EventKind::SwapRelayArrive { swap: index });
        }
        Ok(())
    }

    /// Checks the shards touched by an event plus global conservation:
    /// spendable value, in-flight swap value and burned fees always sum to
    /// the genesis supply.
    fn audit_event(&mut self, touched: &[ShardId]) -> Result<(), NetworkError> {
        for s in touched {
            self.shards[usize::from(*s)]
                .ledger
                .audit_supply()
                .map_err(|e| NetworkError::AuditFailed(format!("shard {s}: {e}")))?;
        }
        let mut unspent: u128 = 0;
        let mut fees: u128 = 0;
        let mut swapped_in: u128 = 0;
        let mut swapped_out: u128 = 0;
        for s in &self.shards {
            unspent += u128::from(s.ledger.unspent_value());
            let f = s.ledger.flows();
            fees += u128::from(f.fees_burned);
            swapped_in += u128::from(f.swapped_in);
            swapped_out += u128::from(f.swapped_out);
        }
        let in_flight: u128 = self
            .swaps
            .iter()
            .map(|e| u128::from(e.swap.in_flight_value()))
            .sum();
        if unspent + in_flight + fees != u128::from(self.genesis_supply)
            || swapped_in != swapped_out
        {
            return Err(NetworkError::AuditFailed(format!(
                "conservation: unspent {unspent} + in flight {in_flight} + fees {fees} != genesis {}",
                self.genesis_supply
            )));
        }
        self.report.audits_passed += 1;
        Ok(())
    }

    fn finish(mut self) -> SimOutcome {
        let adversaries = self.adversaries.clone();
        let (stake_share, weight_share) = adversary_shares(
            &self.validators,
            |id| adversaries.contains(&id),
            &self.config.consensus,
        );
        self.report.adversary_stake_share = stake_share;
        self.report.adversary_weight_share = weight_share;
        self.report.atomicity_violations = self
            .swaps
            .iter()
            .filter(|e| e.terminal_transitions != 1 || !e.swap.state.is_terminal())
            .count() as u64;
        self.report.final_supply = self.shards.iter().map(|s| s.ledger.total_supply()).sum();
        self.report.fees_burned = self
            .shards
            .iter()
            .map(|s| s.ledger.flows().fees_burned)
            .sum();
        self.report.event_log_digest = hash(events_to_jsonl(&self.events).as_bytes());
        SimOutcome {
            report: self.report,
            events: self.events,
            shards: self.shards,
            swaps: self.swaps.into_iter().map(|e| e.swap).collect(),
        }
    }
}

fn two_mut<T>(items: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b, "indices must differ");
    if a < b {
        let (lo, hi) = items.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = items.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

use std::collections::BTreeMap;

use qrpl_core::consensus::{attack_cost, ConsensusParams};
use qrpl_core::crypto::{KeyPair, SchemeId};
use qrpl_core::fraction::Fraction;
use qrpl_core::ledger::{
    Amount, FeePolicy, LedgerError, LedgerState, Payment, TokenId, UtxoToken, Verdict,
};
use qrpl_core::network::{events_to_jsonl, run_simulation, SimConfig};
use qrpl_core::offline::{
    encode_voucher, offline_transfer, reconcile, DeviceState, TierTable, Transport,
};
use qrpl_core::perf::{
    latency_model, storage_model, throughput_model, LatencyParams, StorageParams, ThroughputParams,
};
use qrpl_core::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{apply_overrides, RunConfig, Scenario};
use crate::{Artifact, RunError};

/// Parameters of one scenario after overrides, and what it produced.
pub(crate) struct Outcome {
    pub params: Value,
    pub result: Value,
    pub artifacts: Vec<Artifact>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn failure(category: &'static str, reason: impl ToString) -> RunError {
    RunError::Scenario {
        category,
        reason: reason.to_string(),
    }
}

pub(crate) fn run(config: &RunConfig) -> Result<Outcome, RunError> {
    let o = &config.overrides;
    match config.scenario {
        Scenario::Simulate => simulate(apply_overrides(&SimConfig::default(), o)?, config.seed),
        Scenario::PerfThroughput => throughput(
            apply_overrides(&ThroughputParams::default(), o)?,
            config.seed,
        ),
        Scenario::PerfLatency => latency(apply_overrides(&LatencyRun::default(), o)?, config.seed),
        Scenario::PerfStorage => storage(apply_overrides(&StorageParams::default(), o)?),
        Scenario::AttackCost => attack(apply_overrides(&AttackCostRun::default(), o)?),
        Scenario::LedgerDemo => {
            ledger_demo(apply_overrides(&LedgerDemoRun::default(), o)?, config.seed)
        }
        Scenario::OfflineDemo => {
            offline_demo(apply_overrides(&OfflineDemoRun::default(), o)?, config.seed)
        }
    }
}

fn simulate(params: SimConfig, seed: u64) -> Result<Outcome, RunError> {
    params
        .validate()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let out = run_simulation(&params, seed).map_err(|e| failure("simulation", e))?;
    let r = &out.report;
    if r.atomicity_violations > 0 {
        return Err(failure(
            "atomicity",
            format!("{} swap atomicity violations", r.atomicity_violations),
        ));
    }
    if r.final_supply.checked_add(r.fees_burned) != Some(r.genesis_supply) {
        return Err(failure(
            "conservation",
            format!(
                "final {} + fees {} != genesis {}",
                r.final_supply, r.fees_burned, r.genesis_supply
            ),
        ));
    }
    Ok(Outcome {
        params: to_value(&params),
        result: to_value(r),
        artifacts: vec![Artifact::new("events.jsonl", events_to_jsonl(&out.events))],
    })
}

fn throughput(params: ThroughputParams, seed: u64) -> Result<Outcome, RunError> {
    let closed = params
        .closed_form()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let mc = throughput_model(&params, seed).map_err(|e| RunError::Config(e.to_string()))?;
    Ok(Outcome {
        params: to_value(&params),
        result: json!({ "closed_form": closed, "monte_carlo": mc }),
        artifacts: vec![Artifact::new("samples.csv", mc.samples_csv())],
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatencyRun {
    samples: u64,
    model: LatencyParams,
}

impl Default for LatencyRun {
    fn default() -> Self {
        LatencyRun {
            samples: 100_000,
            model: LatencyParams::default(),
        }
    }
}

fn latency(params: LatencyRun, seed: u64) -> Result<Outcome, RunError> {
    let r = latency_model(&params.model, params.samples, seed)
        .map_err(|e| RunError::Config(e.to_string()))?;
    Ok(Outcome {
        params: to_value(&params),
        result: to_value(&r),
        artifacts: Vec::new(),
    })
}

fn storage(params: StorageParams) -> Result<Outcome, RunError> {
    let r = storage_model(&params).map_err(|e| RunError::Config(e.to_string()))?;
    Ok(Outcome {
        params: to_value(&params),
        result: to_value(&r),
        artifacts: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttackCostRun {
    total_stake: Amount,
    alpha: Fraction,
    fee_rate: Fraction,
    /// Share of total stake the attacker wants to add as weight.
    delta: Fraction,
    block_reward: Amount,
}

impl Default for AttackCostRun {
    fn default() -> Self {
        let c = ConsensusParams::default();
        AttackCostRun {
            total_stake: 100_000_000,
            alpha: c.alpha_weight,
            fee_rate: c.fee_rate,
            delta: Fraction::new(1, 100).expect("nonzero denominator"),
            block_reward: 5_000,
        }
    }
}

fn attack(params: AttackCostRun) -> Result<Outcome, RunError> {
    let consensus = ConsensusParams {
        alpha_weight: params.alpha,
        fee_rate: params.fee_rate,
        ..ConsensusParams::default()
    };
    consensus
        .validate()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let r = attack_cost(
        params.total_stake,
        &consensus,
        params.delta,
        params.block_reward,
    )
    .map_err(|e| RunError::Config(e.to_string()))?;
    Ok(Outcome {
        params: to_value(&params),
        result: to_value(&r),
        artifacts: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LedgerDemoRun {
    payments: u32,
    genesis_value: Amount,
    /// Every n-th payment is followed by a replay and a tampered copy.
    attack_every: u32,
    scheme: SchemeId,
}

impl Default for LedgerDemoRun {
    fn default() -> Self {
        LedgerDemoRun {
            payments: 200,
            genesis_value: 10_000_000,
            attack_every: 10,
            scheme: SchemeId::Dilithium2,
        }
    }
}

fn verdict_name(v: Verdict) -> String {
    to_value(&v).as_str().unwrap_or_default().to_string()
}

fn ledger_demo(params: LedgerDemoRun, seed: u64) -> Result<Outcome, RunError> {
    if params.genesis_value < 2 || params.attack_every == 0 {
        return Err(RunError::Config(
            "genesis_value must be at least 2 and attack_every positive".into(),
        ));
    }
    let mut rng = rng::derive(seed, "ledger-demo", 0);
    let policy = FeePolicy::default();
    let mut ledger = LedgerState::new();
    let genesis_key = KeyPair::generate(params.scheme, &mut rng);
    let genesis = UtxoToken::for_owner(&genesis_key, params.genesis_value, 0);
    ledger
        .mint(genesis.clone())
        .map_err(|e| failure("ledger", e))?;
    let mut wallet: Vec<(TokenId, Amount, KeyPair)> =
        vec![(genesis.token_id, genesis.value, genesis_key)];

    let mut rejected: BTreeMap<String, u64> = BTreeMap::new();
    let (mut accepted, mut fees, mut imbalances_refused, mut false_accepts) =
        (0u64, 0u64, 0u64, 0u64);
    for i in 0..params.payments {
        let spendable: Vec<usize> = (0..wallet.len()).filter(|&k| wallet[k].1 >= 2).collect();
        if spendable.is_empty() {
            break;
        }
        let pick = spendable[rng.gen_range(0..spendable.len())];
        let (id, value, owner) = wallet.swap_remove(pick);
        let amount = rng.gen_range(1..value);
        let fee = policy.fee_for(amount);
        let change = value - amount - fee;
        let payee = KeyPair::generate(params.scheme, &mut rng);
        let change_key = KeyPair::generate(params.scheme, &mut rng);
        let mut payments = vec![Payment::new(payee.public_key(), amount)];
        if change > 0 {
            payments.push(Payment::new(change_key.public_key(), change));
        }
        let overpay = ledger.create_transaction(
            &owner,
            &[id],
            &[Payment::new(payee.public_key(), value)],
            1,
            &mut rng,
        );
        if matches!(overpay, Err(LedgerError::Imbalance { .. })) {
            imbalances_refused += 1;
        }
        let prepared = ledger
            .create_transaction(&owner, &[id], &payments, fee, &mut rng)
            .map_err(|e| failure("ledger", e))?;
        ledger
            .apply_transaction(&prepared.tx)
            .map_err(|e| failure("ledger", e))?;
        accepted += 1;
        fees += fee;
        for (out, key) in prepared.tx.outputs.iter().zip(prepared.output_keys) {
            wallet.push((out.token_id, out.value, key));
        }
        if (i + 1) % params.attack_every == 0 {
            let mut tampered = prepared.tx.clone();
            tampered.outputs[0].value += 1;
            for tx in [&prepared.tx, &tampered] {
                match ledger.validate_transaction(tx) {
                    Verdict::Accept => false_accepts += 1,
                    v => *rejected.entry(verdict_name(v)).or_default() += 1,
                }
            }
        }
        ledger.advance_height();
    }
    ledger.audit().map_err(|e| failure("audit", e))?;
    let supply = ledger.total_supply();
    if false_accepts > 0 || supply + fees != params.genesis_value {
        return Err(failure(
            "ledger",
            format!("{false_accepts} invalid transactions accepted, supply {supply} + fees {fees}"),
        ));
    }
    Ok(Outcome {
        params: to_value(&params),
        result: json!({
            "accepted": accepted,
            "rejected": rejected,
            "imbalances_refused": imbalances_refused,
            "false_accepts": false_accepts,
            "fees_burned": fees,
            "final_supply": supply,
            "unspent_tokens": ledger.unspent().len(),
            "height": ledger.height(),
            "audit": "passed",
        }),
        artifacts: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OfflineDemoRun {
    /// Copies of the paying device, each spending the same token.
    clones: u32,
    balance: Amount,
    amount: Amount,
    tier_level: u8,
}

impl Default for OfflineDemoRun {
    fn default() -> Self {
        OfflineDemoRun {
            clones: 2,
            balance: 50_000,
            amount: 30_000,
            tier_level: 0,
        }
    }
}

fn offline_demo(params: OfflineDemoRun, seed: u64) -> Result<Outcome, RunError> {
    if params.clones == 0 {
        return Err(RunError::Config("clones must be at least 1".into()));
    }
    let tiers = TierTable::default();
    let tier = tiers
        .tier(params.tier_level)
        .ok_or_else(|| RunError::Config(format!("unknown tier level {}", params.tier_level)))?;
    let mut rng = rng::derive(seed, "offline-demo", 0);
    let mut ledger = LedgerState::new();
    let mut payer = DeviceState::new("payer", KeyPair::generate(SchemeId::Dilithium2, &mut rng));
    let key = KeyPair::generate(SchemeId::Dilithium2, &mut rng);
    let token = UtxoToken::for_owner(&key, params.balance, 0);
    ledger
        .mint(token.clone())
        .map_err(|e| failure("ledger", e))?;
    payer.held.push((token, key));
    let genesis = ledger.total_supply();

    let mut devices = Vec::new();
    let mut qr_frames = Vec::new();
    for c in 0..params.clones {
        let mut sender = payer.clone();
        let mut recipient = DeviceState::new(
            &format!("payee-{c}"),
            KeyPair::generate(SchemeId::Dilithium2, &mut rng),
        );
        let v = offline_transfer(&mut sender, &mut recipient, params.amount, tier, &mut rng)
            .map_err(|e| RunError::Config(e.to_string()))?;
        qr_frames.push(encode_voucher(&v, Transport::Qr).len());
        devices.push(recipient);
        devices.push(sender);
    }
    let mut reports = Vec::new();
    let mut applied = 0;
    for d in devices.iter_mut() {
        let r = reconcile(d, &mut ledger, &tiers);
        ledger.audit().map_err(|e| failure("audit", e))?;
        applied += r.applied.len();
        reports.push(json!({ "device": d.device_id, "report": r, "spendable": d.spendable() }));
    }
    // Clones share keys, so the winning clone's change shows up on all of them.
    let held: Amount = devices
        .iter()
        .flat_map(|d| d.held.iter().map(|(t, _)| (t.token_id, t.value)))
        .collect::<BTreeMap<_, _>>()
        .values()
        .sum();
    if applied != 1 || held != ledger.total_supply() {
        return Err(failure(
            "offline",
            format!(
                "{applied} vouchers applied, devices hold {held} of {}",
                ledger.total_supply()
            ),
        ));
    }
    Ok(Outcome {
        params: to_value(&params),
        result: json!({
            "genesis_supply": genesis,
            "final_supply": ledger.total_supply(),
            "vouchers_applied": applied,
            "qr_frames": qr_frames,
            "devices": reports,
            "audit": "passed",
        }),
        artifacts: Vec::new(),
    })
}

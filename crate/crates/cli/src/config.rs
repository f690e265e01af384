use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::RunError;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Simulate,
    PerfThroughput,
    PerfLatency,
    PerfStorage,
    AttackCost,
    LedgerDemo,
    OfflineDemo,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Simulate => "simulate",
            Scenario::PerfThroughput => "perf-throughput",
            Scenario::PerfLatency => "perf-latency",
            Scenario::PerfStorage => "perf-storage",
            Scenario::AttackCost => "attack-cost",
            Scenario::LedgerDemo => "ledger-demo",
            Scenario::OfflineDemo => "offline-demo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Text,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
            OutputFormat::Text => "txt",
        }
    }
}

/// Everything needed to reproduce a run.
///
/// `overrides` maps dotted parameter paths (`network.shard_count`) to values
/// applied on top of the scenario defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn new(scenario: Scenario) -> Self {
        RunConfig {
            scenario,
            seed: 0,
            overrides: BTreeMap::new(),
            format: OutputFormat::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    /// Parses a JSON run config, or the config embedded in a manifest after
    /// checking its recorded hash.
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        let (config, expected) = match value {
            Value::Object(mut map) if map.contains_key("config_hash") => {
                let hash = map.remove("config_hash");
                (map.remove("config").unwrap_or(Value::Null), hash)
            }
            other => (other, None),
        };
        let config: RunConfig =
            serde_json::from_value(config).map_err(|e| RunError::Config(e.to_string()))?;
        if let Some(expected) = expected {
            if expected != Value::String(config.hash_hex()) {
                return Err(RunError::Config(
                    "manifest config_hash does not match its config".into(),
                ));
            }
        }
        Ok(config)
    }

    /// Loads JSON files (configs or manifests) by extension, TOML otherwise.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("run config serializes")
    }

    pub fn hash_hex(&self) -> String {
        qrpl_core::crypto::hash(self.canonical_json().as_bytes()).to_hex()
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.overrides.insert(key.to_string(), value.into());
    }
}

/// Applies dotted-path overrides to `base`. Paths must already exist in the
/// serialized defaults; the result is re-read through the strict schema.
pub fn apply_overrides<T>(base: &T, overrides: &BTreeMap<String, Value>) -> Result<T, RunError>
where
    T: Serialize + DeserializeOwned,
{
    let mut tree = serde_json::to_value(base).map_err(|e| RunError::Config(e.to_string()))?;
    for (key, value) in overrides {
        let mut node = &mut tree;
        for part in key.split('.') {
            node = node
                .as_object_mut()
                .and_then(|m| m.get_mut(part))
                .ok_or_else(|| RunError::Config(format!("unknown override key `{key}`")))?;
        }
        *node = value.clone();
    }
    serde_json::from_value(tree).map_err(|e| RunError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_top_level_keys_rejected() {
        assert!(RunConfig::from_toml("scenario = \"simulate\"\nsed = 1\n").is_err());
        let c = RunConfig::from_toml(
            "scenario = \"perf-latency\"\nseed = 9\n[overrides]\nsamples = 20000\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.overrides["samples"], Value::from(20_000));
    }

    #[test]
    fn overrides_must_name_existing_fields() {
        let base = qrpl_core::perf::StorageParams::default();
        let mut o = BTreeMap::new();
        o.insert("shards".to_string(), Value::from(4));
        assert_eq!(apply_overrides(&base, &o).unwrap().shards, 4);
        o.insert("shard".to_string(), Value::from(4));
        assert!(apply_overrides(&base, &o).is_err());
        let mut wrong_type = BTreeMap::new();
        wrong_type.insert("shards".to_string(), Value::from("four"));
        assert!(apply_overrides(&base, &wrong_type).is_err());
    }

    #[test]
    fn manifest_hash_is_checked() {
        let mut c = RunConfig::new(Scenario::AttackCost);
        c.seed = 3;
        let manifest = serde_json::json!({"config": c, "config_hash": c.hash_hex(), "seed": 3});
        assert_eq!(RunConfig::from_json(&manifest.to_string()).unwrap(), c);
        let forged = serde_json::json!({"config": c, "config_hash": "00", "seed": 3});
        assert!(RunConfig::from_json(&forged.to_string()).is_err());
    }
}

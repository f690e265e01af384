//! Command-line harness: runs a scenario from a [`RunConfig`], renders the
//! report and writes it next to a manifest that can replay it.

mod config;
mod scenarios;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use config::{apply_overrides, OutputFormat, RunConfig, Scenario};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{category} failure: {reason}")]
    Scenario {
        category: &'static str,
        reason: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// 2 for configuration problems, 1 for everything that failed while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Scenario { category, .. } => category,
            RunError::Io { .. } => "io",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        let reason = match self {
            RunError::Scenario { reason, .. } => reason.clone(),
            other => other.to_string(),
        };
        json!({ "error": self.category(), "reason": reason }).to_string()
    }
}

/// An extra output file produced by a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

impl Artifact {
    pub fn new(name: &str, contents: impl Into<Vec<u8>>) -> Self {
        Artifact {
            name: name.to_string(),
            contents: contents.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    /// Config, seed, effective parameters and result.
    pub report: Value,
    pub artifacts: Vec<Artifact>,
}

pub fn execute(config: &RunConfig) -> Result<Run, RunError> {
    let outcome = scenarios::run(config)?;
    let report = json!({
        "scenario": config.scenario.name(),
        "seed": config.seed,
        "config_hash": config.hash_hex(),
        "config": config,
        "params": outcome.params,
        "result": outcome.result,
    });
    Ok(Run {
        config: config.clone(),
        report,
        artifacts: outcome.artifacts,
    })
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match value {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Run {
    pub fn render(&self, format: OutputFormat) -> String {
        let mut rows = Vec::new();
        flatten("", &self.report, &mut rows);
        match format {
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
                s.push('\n');
                s
            }
            OutputFormat::Csv => {
                let mut s = String::from("key,value\n");
                for (k, v) in rows {
                    s.push_str(&format!("{},{}\n", csv_field(&k), csv_field(&v)));
                }
                s
            }
            OutputFormat::Text => rows.iter().map(|(k, v)| format!("{k}: {v}\n")).collect(),
        }
    }

    /// Writes the report, artifacts and manifest into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Manifest, RunError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| RunError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let report_name = format!("report.{}", self.config.format.extension());
        let mut files = vec![Artifact::new(&report_name, self.render(self.config.format))];
        files.extend(self.artifacts.iter().cloned());
        let mut digests = BTreeMap::new();
        for f in &files {
            let path = dir.join(&f.name);
            std::fs::write(&path, &f.contents).map_err(io(&path))?;
            digests.insert(
                f.name.clone(),
                qrpl_core::crypto::hash(&f.contents).to_hex(),
            );
        }
        let manifest = Manifest {
            config_hash: self.config.hash_hex(),
            seed: self.config.seed,
            config: self.config.clone(),
            files: digests,
        };
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(io(&path))?;
        Ok(manifest)
    }
}

/// Loadable with `--config manifest.json` to replay the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    /// SHA3-256 of every written file.
    pub files: BTreeMap<String, String>,
}

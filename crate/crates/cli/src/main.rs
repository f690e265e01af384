use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qrpl_cli::{execute, OutputFormat, RunConfig, RunError, Scenario};

#[derive(Debug, Parser)]
#[command(
    name = "qrpl",
    version,
    about = "Sharded payment ledger simulator and model harness"
)]
struct Cli {
    /// TOML run config, or a JSON config or manifest to replay.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the report, artifacts and manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Discrete-event run of the sharded network.
    Simulate {
        #[arg(long)]
        shards: Option<u16>,
        #[arg(long)]
        validators: Option<u32>,
        #[arg(long)]
        blocks: Option<u64>,
        /// Probability of dropping a cross-shard relay message.
        #[arg(long)]
        message_loss: Option<f64>,
    },
    /// Throughput, latency and storage models.
    Perf {
        #[command(subcommand)]
        model: PerfCommand,
    },
    /// Cost of gaining consensus weight through sham activity.
    AttackCost {
        #[arg(long)]
        total_stake: Option<u64>,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        fee_rate: Option<String>,
        /// Relative weight gain sought.
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        block_reward: Option<u64>,
    },
    /// Random payments with replay and tamper attempts on one ledger.
    LedgerDemo {
        #[arg(long)]
        payments: Option<u32>,
    },
    /// Offline vouchers from cloned devices, then reconciliation.
    OfflineDemo {
        #[arg(long)]
        clones: Option<u32>,
        #[arg(long)]
        amount: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
enum PerfCommand {
    Throughput {
        #[arg(long)]
        runs: Option<u32>,
        #[arg(long, value_parser = ["independent", "common-shock"])]
        mode: Option<String>,
        #[arg(long)]
        std_factor: Option<f64>,
        #[arg(long)]
        tx_per_block: Option<f64>,
        #[arg(long)]
        shards: Option<u32>,
    },
    Latency {
        #[arg(long)]
        samples: Option<u64>,
    },
    Storage {
        #[arg(long, value_parser = ["calibrated", "physical"])]
        preset: Option<String>,
    },
}

fn set<T: Into<serde_json::Value>>(config: &mut RunConfig, key: &str, value: Option<T>) {
    if let Some(v) = value {
        config.set(key, v);
    }
}

fn scenario_of(command: &Command) -> Scenario {
    match command {
        Command::Simulate { .. } => Scenario::Simulate,
        Command::Perf {
            model: PerfCommand::Throughput { .. },
        } => Scenario::PerfThroughput,
        Command::Perf {
            model: PerfCommand::Latency { .. },
        } => Scenario::PerfLatency,
        Command::Perf {
            model: PerfCommand::Storage { .. },
        } => Scenario::PerfStorage,
        Command::AttackCost { .. } => Scenario::AttackCost,
        Command::LedgerDemo { .. } => Scenario::LedgerDemo,
        Command::OfflineDemo { .. } => Scenario::OfflineDemo,
    }
}

/// Config file first, then global flags, then subcommand flags.
fn resolve(cli: Cli) -> Result<(RunConfig, Option<PathBuf>), RunError> {
    let mut config = match (&cli.config, &cli.command) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(cmd)) => RunConfig::new(scenario_of(cmd)),
        (None, None) => {
            return Err(RunError::Config(
                "a subcommand or --config is required".into(),
            ))
        }
    };
    if let Some(cmd) = &cli.command {
        let scenario = scenario_of(cmd);
        if scenario != config.scenario {
            return Err(RunError::Config(format!(
                "config is for `{}` but the command is `{}`",
                config.scenario.name(),
                scenario.name()
            )));
        }
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(format) = cli.format {
        config.format = format;
    }
    let c = &mut config;
    match cli.command {
        Some(Command::Simulate {
            shards,
            validators,
            blocks,
            message_loss,
        }) => {
            set(c, "network.shard_count", shards);
            set(c, "validators", validators);
            set(c, "blocks", blocks);
            set(c, "network.message_loss", message_loss);
        }
        Some(Command::Perf { model }) => match model {
            PerfCommand::Throughput {
                runs,
                mode,
                std_factor,
                tx_per_block,
                shards,
            } => {
                set(c, "num_runs", runs);
                set(c, "correlation_mode", mode);
                set(c, "std_factor", std_factor);
                set(c, "tx_per_block", tx_per_block);
                set(c, "shards", shards);
            }
            PerfCommand::Latency { samples } => set(c, "samples", samples),
            PerfCommand::Storage { preset } => {
                let bytes = preset.map(|p| {
                    let p = if p == "physical" {
                        qrpl_core::perf::StoragePreset::Physical
                    } else {
                        qrpl_core::perf::StoragePreset::Calibrated
                    };
                    qrpl_core::perf::StorageParams::preset(p).retained_bytes_per_tx
                });
                set(c, "retained_bytes_per_tx", bytes);
            }
        },
        Some(Command::AttackCost {
            total_stake,
            alpha,
            fee_rate,
            delta,
            block_reward,
        }) => {
            set(c, "total_stake", total_stake);
            set(c, "alpha", alpha);
            set(c, "fee_rate", fee_rate);
            set(c, "delta", delta);
            set(c, "block_reward", block_reward);
        }
        Some(Command::LedgerDemo { payments }) => set(c, "payments", payments),
        Some(Command::OfflineDemo { clones, amount }) => {
            set(c, "clones", clones);
            set(c, "amount", amount);
        }
        None => {}
    }
    Ok((config, cli.out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(cli).and_then(|(config, out)| {
        let run = execute(&config)?;
        if let Some(dir) = out {
            run.write_to(&dir)?;
        }
        Ok(run.render(config.format))
    });
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

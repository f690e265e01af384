use serde::{Deserialize, Serialize};

use super::NetworkError;

pub const MICROS_PER_SECOND: f64 = 1_000_000.0;

/// Seconds to whole simulated microseconds.
pub fn to_micros(seconds: f64) -> u64 {
    (seconds * MICROS_PER_SECOND).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub shard_count: u16,
    pub block_time_s: f64,
    pub propagation_delay_s: f64,
    pub vote_delay_s: f64,
    pub cross_shard_delay_s: f64,
    pub swap_timeout_s: f64,
    /// Probability that a cross-shard relay message is dropped.
    pub message_loss: f64,
    /// Upper bound of uniform extra delay added to each message.
    pub delay_jitter_s: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            shard_count: 256,
            block_time_s: 10.0,
            propagation_delay_s: 0.3,
            vote_delay_s: 0.3,
            cross_shard_delay_s: 0.7,
            swap_timeout_s: 5.0,
            message_loss: 0.0,
            delay_jitter_s: 0.0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |msg: String| Err(NetworkError::Config(msg));
        if self.shard_count == 0 {
            return bad("shard_count must be positive".into());
        }
        if !(10.0..=20.0).contains(&self.block_time_s) {
            return bad(format!(
                "block_time_s {} outside [10, 20]",
                self.block_time_s
            ));
        }
        for (name, v) in [
            ("propagation_delay_s", self.propagation_delay_s),
            ("vote_delay_s", self.vote_delay_s),
            ("cross_shard_delay_s", self.cross_shard_delay_s),
            ("delay_jitter_s", self.delay_jitter_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative number"));
            }
        }
        if !(self.swap_timeout_s.is_finite() && self.swap_timeout_s > 0.0) {
            return bad("swap_timeout_s must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.message_loss) {
            return bad(format!("message_loss {} outside [0, 1]", self.message_loss));
        }
        Ok(())
    }

    pub fn block_time_us(&self) -> u64 {
        to_micros(self.block_time_s)
    }
}

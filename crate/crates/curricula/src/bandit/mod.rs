//! Non-stationary K-armed bandit policies and the reward mapping that
//! feeds them.
//!
//! Two policies are provided: stochastic exponential-weights
//! ([`Exp3sState`]) and deterministic sliding-window UCB
//! ([`SwUcbState`]), plus a uniform-random baseline for experiments.
//! Both consume rewards mapped into [-1, 1] by [`RewardMapper`].
//!
//! The "policy vector" reported for tracing and fallback ranking is the
//! sampling distribution for EXP3.S and the unnormalized per-arm index
//! values for SW-UCB#.

mod exp3s;
mod reward;
mod swucb;

pub use exp3s::Exp3sState;
pub use reward::{RewardMapper, DEFAULT_HISTORY_SIZE};
pub use swucb::{detect_mode, EnvironmentMode, SwUcbState, MODE_DETECTION_WINDOW};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("reward must be finite, got {value}")]
    NonFiniteReward { value: f64 },
    #[error("gain must be finite, got {value}")]
    NonFiniteGain { value: f64 },
    #[error("arm {arm} out of range 1..={arm_count}")]
    ArmOutOfRange { arm: usize, arm_count: usize },
}

/// A task-selection policy. Snapshots serialize to JSON and restore
/// exactly, so long runs can be resumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum Bandit {
    Exp3s(Exp3sState),
    SwUcb(SwUcbState),
    /// Uniform-random arm choice; the no-learning baseline.
    Uniform { arm_count: usize },
}

impl Bandit {
    pub fn arm_count(&self) -> usize {
        match self {
            Bandit::Exp3s(s) => s.arm_count(),
            Bandit::SwUcb(s) => s.arm_count(),
            Bandit::Uniform { arm_count } => *arm_count,
        }
    }

    /// Chooses a 1-based arm. SW-UCB# is deterministic and ignores the
    /// generator.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            Bandit::Exp3s(s) => s.draw(rng),
            Bandit::SwUcb(s) => s.select(),
            Bandit::Uniform { arm_count } => rng.random_range(1..=*arm_count),
        }
    }

    /// Feeds back the mapped reward for `chosen`; `raw_loss` drives
    /// SW-UCB# mode detection and is ignored by the other policies.
    pub fn update(&mut self, chosen: usize, reward: f64, raw_loss: f64) -> Result<(), BanditError> {
        match self {
            Bandit::Exp3s(s) => s.update(chosen, reward),
            Bandit::SwUcb(s) => s.update(chosen, reward, raw_loss),
            Bandit::Uniform { arm_count } => {
                if chosen == 0 || chosen > *arm_count {
                    return Err(BanditError::ArmOutOfRange { arm: chosen, arm_count: *arm_count });
                }
                Ok(())
            }
        }
    }

    /// Per-arm preference values used for trace output and exhaustion
    /// fallback ranking.
    pub fn policy(&self) -> Vec<f64> {
        match self {
            Bandit::Exp3s(s) => s.policy(),
            Bandit::SwUcb(s) => s.policy(),
            Bandit::Uniform { arm_count } => vec![1.0 / *arm_count as f64; *arm_count],
        }
    }
}

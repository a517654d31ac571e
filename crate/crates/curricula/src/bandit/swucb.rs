//! SW-UCB#: a sliding-window upper-confidence-bound bandit for
//! non-stationary rewards.
//!
//! Arm selection maximizes the windowed mean reward plus an exploration
//! bonus:
//!
//! ```text
//! k_t = argmax_k { rbar_k + c_k },   c_k = sqrt((1 + alpha) ln t / n_k)
//! ```
//!
//! where `rbar_k` and `n_k` are computed over a sliding window of
//! length `tau(t) = min(ceil(lambda * t^alpha), t)`. The exponent
//! `alpha` depends on the detected environment mode: `gamma` while the
//! recent loss history is volatile (abruptly changing) and `kappa` once
//! it settles (slowly varying). Since `gamma < kappa`, volatile phases
//! use shorter windows and forget stale rewards faster. Arms with no
//! observation inside the current window are re-explored first.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::BanditError;

/// How many recent raw losses the mode detector looks at.
pub const MODE_DETECTION_WINDOW: usize = 100;

/// Loss-volatility regime, chosen by [`detect_mode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvironmentMode {
    #[serde(rename = "abruptly-changing")]
    AbruptlyChanging,
    #[serde(rename = "slowly-varying")]
    SlowlyVarying,
}

/// Classifies the environment from recent raw losses: the squared
/// coefficient of variation (sample variance over squared mean) of the
/// last [`MODE_DETECTION_WINDOW`] losses is compared against
/// `threshold`. With fewer losses than the window the environment is
/// treated as abruptly changing, matching the volatility of early
/// training.
pub fn detect_mode(losses: &[f64], threshold: f64) -> EnvironmentMode {
    if losses.len() < MODE_DETECTION_WINDOW {
        return EnvironmentMode::AbruptlyChanging;
    }
    let window = &losses[losses.len() - MODE_DETECTION_WINDOW..];
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let variance = window.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    if variance == 0.0 {
        return EnvironmentMode::SlowlyVarying;
    }
    if mean == 0.0 {
        return EnvironmentMode::AbruptlyChanging;
    }
    if variance / (mean * mean) > threshold {
        EnvironmentMode::AbruptlyChanging
    } else {
        EnvironmentMode::SlowlyVarying
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RewardRecord {
    step: u64,
    /// 0-based arm slot.
    arm: usize,
    reward: f64,
}

/// Sliding-window state. Arm indices are 1-based at the public surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwUcbState {
    arm_count: usize,
    lambda: f64,
    gamma: f64,
    kappa: f64,
    nu: f64,
    history: VecDeque<RewardRecord>,
    window_counts: Vec<u64>,
    window_sums: Vec<f64>,
    loss_history: VecDeque<f64>,
    mode: EnvironmentMode,
    step: u64,
}

impl SwUcbState {
    /// Default hyperparameters: lambda 12, gamma 0.4, kappa 0.8, nu 0.1.
    pub fn new(arm_count: usize) -> Self {
        Self::with_params(arm_count, 12.0, 0.4, 0.8, 0.1)
    }

    pub fn with_params(arm_count: usize, lambda: f64, gamma: f64, kappa: f64, nu: f64) -> Self {
        assert!(arm_count >= 2, "need at least two arms");
        assert!(lambda > 0.0, "lambda must be positive");
        assert!((0.0..1.0).contains(&gamma), "gamma must be in (0, 1)");
        assert!((0.0..1.0).contains(&kappa), "kappa must be in (0, 1)");
        assert!(gamma <= kappa, "gamma governs the short (abrupt) window and must not exceed kappa");
        assert!(nu > 0.0, "nu must be positive");
        Self {
            arm_count,
            lambda,
            gamma,
            kappa,
            nu,
            history: VecDeque::new(),
            window_counts: vec![0; arm_count],
            window_sums: vec![0.0; arm_count],
            loss_history: VecDeque::new(),
            mode: EnvironmentMode::AbruptlyChanging,
            step: 0,
        }
    }

    pub fn arm_count(&self) -> usize {
        self.arm_count
    }

    pub fn mode(&self) -> EnvironmentMode {
        self.mode
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Window exponent for the current mode.
    fn alpha(&self) -> f64 {
        match self.mode {
            EnvironmentMode::AbruptlyChanging => self.gamma,
            EnvironmentMode::SlowlyVarying => self.kappa,
        }
    }

    /// Sliding-window length at step `t` for exponent `alpha`:
    /// `min(ceil(lambda * t^alpha), t)`.
    pub fn window_len(&self, t: u64, alpha: f64) -> u64 {
        if t == 0 {
            return 0;
        }
        let raw = (self.lambda * (t as f64).powf(alpha)).ceil() as u64;
        raw.min(t)
    }

    /// Times arm `index` (1-based) was played within the current window.
    pub fn window_count(&self, index: usize) -> u64 {
        self.window_counts[index - 1]
    }

    /// Windowed mean reward of arm `index` (1-based); 0 when unplayed.
    pub fn window_mean(&self, index: usize) -> f64 {
        let n = self.window_counts[index - 1];
        if n == 0 {
            0.0
        } else {
            self.window_sums[index - 1] / n as f64
        }
    }

    /// Per-arm index values `rbar_k + c_k`. Arms without a window
    /// observation get `f64::MAX`, which both keeps the vector
    /// serializable and ranks them first for re-exploration.
    pub fn policy(&self) -> Vec<f64> {
        let alpha = self.alpha();
        let ln_t = if self.step > 0 { (self.step as f64).ln() } else { 0.0 };
        (0..self.arm_count)
            .map(|slot| {
                let n = self.window_counts[slot];
                if n == 0 {
                    f64::MAX
                } else {
                    self.window_sums[slot] / n as f64 + ((1.0 + alpha) * ln_t / n as f64).sqrt()
                }
            })
            .collect()
    }

    /// Deterministic 1-based arm choice: the lowest-indexed arm with no
    /// window observation if any, otherwise the argmax of the index
    /// values with ties broken toward the larger arm.
    pub fn select(&self) -> usize {
        if let Some(slot) = self.window_counts.iter().position(|&n| n == 0) {
            return slot + 1;
        }
        let policy = self.policy();
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for (slot, &value) in policy.iter().enumerate() {
            if value >= best_value {
                best_value = value;
                best = slot;
            }
        }
        best + 1
    }

    /// Records a reward for `chosen` (1-based) plus the raw training
    /// loss driving mode detection, then re-trims the window. Evicted
    /// records are gone for good: a later mode switch to a longer
    /// window only affects observations from that point on.
    pub fn update(&mut self, chosen: usize, reward: f64, raw_loss: f64) -> Result<(), BanditError> {
        if chosen == 0 || chosen > self.arm_count {
            return Err(BanditError::ArmOutOfRange { arm: chosen, arm_count: self.arm_count });
        }
        if !reward.is_finite() {
            return Err(BanditError::NonFiniteReward { value: reward });
        }

        self.step += 1;
        let slot = chosen - 1;
        self.history.push_back(RewardRecord { step: self.step, arm: slot, reward });
        self.window_counts[slot] += 1;
        self.window_sums[slot] += reward;

        let tau = self.window_len(self.step, self.alpha());
        while let Some(front) = self.history.front() {
            // keep records with step > t - tau
            if front.step + tau <= self.step {
                let evicted = self.history.pop_front().expect("front exists");
                self.window_counts[evicted.arm] -= 1;
                self.window_sums[evicted.arm] -= evicted.reward;
            } else {
                break;
            }
        }

        self.loss_history.push_back(raw_loss);
        while self.loss_history.len() > MODE_DETECTION_WINDOW {
            self.loss_history.pop_front();
        }
        self.mode = detect_mode(self.loss_history.make_contiguous(), self.nu);
        Ok(())
    }
}

//! EXP3.S: an exponential-weights bandit for non-stationary rewards.
//!
//! The policy mixes a softmax over arm weights with uniform
//! exploration:
//!
//! ```text
//! pi_k = (1 - epsilon) * exp(w_k) / sum_j exp(w_j) + epsilon / K
//! ```
//!
//! After observing a reward on the chosen arm, every weight receives an
//! importance-weighted reward estimate and is then mixed toward the
//! other arms with a decaying coefficient `alpha_t = 1/t`, which keeps
//! the policy from committing irreversibly to an arm whose payoff may
//! drift:
//!
//! ```text
//! r~_j    = (reward * [j = chosen] + beta) / pi_j
//! w'_j    = ln[ (1 - a_t) e^{w_j + eta r~_j}
//!             + a_t/(K-1) * sum_{i != j} e^{w_i + eta r~_i} ]
//! ```
//!
//! All exponentials are evaluated with max-subtraction so weights stay
//! finite over arbitrarily long runs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BanditError;

/// Weight state for the exponential-weights policy. Arm indices are
/// 1-based at the public surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp3sState {
    weights: Vec<f64>,
    epsilon: f64,
    eta: f64,
    beta: f64,
    step: u64,
}

impl Exp3sState {
    /// Default hyperparameters: epsilon 0.05, eta 0.001, beta 0.
    pub fn new(arm_count: usize) -> Self {
        Self::with_params(arm_count, 0.05, 0.001, 0.0)
    }

    pub fn with_params(arm_count: usize, epsilon: f64, eta: f64, beta: f64) -> Self {
        assert!(arm_count >= 2, "need at least two arms");
        assert!((0.0..=1.0).contains(&epsilon), "epsilon must be in [0, 1]");
        assert!(eta > 0.0, "eta must be positive");
        assert!(beta >= 0.0, "beta must be non-negative");
        Self { weights: vec![0.0; arm_count], epsilon, eta, beta, step: 0 }
    }

    pub fn arm_count(&self) -> usize {
        self.weights.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Current sampling distribution. Entries sum to 1 and each is at
    /// least `epsilon / K`.
    pub fn policy(&self) -> Vec<f64> {
        let k = self.weights.len() as f64;
        let max = self.weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = self.weights.iter().map(|w| (w - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.iter().map(|e| (1.0 - self.epsilon) * e / sum + self.epsilon / k).collect()
    }

    /// Samples a 1-based arm from the current policy.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let policy = self.policy();
        let x: f64 = rng.random();
        let mut cumulative = 0.0;
        for (i, p) in policy.iter().enumerate() {
            cumulative += p;
            if x < cumulative {
                return i + 1;
            }
        }
        policy.len()
    }

    /// Applies one reward observation for `chosen` (1-based).
    pub fn update(&mut self, chosen: usize, reward: f64) -> Result<(), BanditError> {
        if !reward.is_finite() {
            return Err(BanditError::NonFiniteReward { value: reward });
        }
        let k = self.weights.len();
        if chosen == 0 || chosen > k {
            return Err(BanditError::ArmOutOfRange { arm: chosen, arm_count: k });
        }

        let policy = self.policy();
        self.step += 1;
        let alpha = 1.0 / self.step as f64;

        let boosted: Vec<f64> = (0..k)
            .map(|j| {
                let indicator = if j + 1 == chosen { reward } else { 0.0 };
                self.weights[j] + self.eta * (indicator + self.beta) / policy[j]
            })
            .collect();

        let max = boosted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = boosted.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        self.weights = (0..k)
            .map(|j| max + ((1.0 - alpha) * exps[j] + alpha / (k as f64 - 1.0) * (total - exps[j])).ln())
            .collect();
        Ok(())
    }
}

//! A deterministic synthetic learner for exercising the scheduler
//! without a neural network.
//!
//! The learner keeps one mastery value per task. Evaluation loss on a
//! batch from task `k` is `base_loss[k] * exp(-skill[k])` plus optional
//! Gaussian noise, so losses start at `base_loss` and decay toward zero
//! as skill accumulates — and so do the progress gains, which shrinks
//! the reward signal late in a run exactly the way real training does.
//!
//! Training on task `k` adds `sim_rate * transfer[:, k]` to the skill
//! vector. With prerequisite gating enabled, the increment to
//! `skill[k]` itself is scaled by `sigmoid(skill[k-1] - threshold)`,
//! which makes hard tasks unproductive until their predecessor is
//! mastered: the most rewarding task moves over time, giving the
//! non-stationary bandits something real to track.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curriculum::Batch;
use crate::scheduler::{Learner, LearnerError};

#[derive(Debug, Error)]
pub enum SimLearnerError {
    #[error("base_loss must have one entry per task (got {got}, expected {expected})")]
    BaseLossLength { got: usize, expected: usize },
    #[error("base_loss must be strictly increasing")]
    BaseLossNotIncreasing,
    #[error("transfer must be a {k}x{k} matrix")]
    TransferShape { k: usize },
    #[error("transfer entries must be non-negative")]
    NegativeTransfer,
    #[error("transfer diagonal must dominate its row and column entries")]
    WeakDiagonal,
    #[error("sim_rate must be positive")]
    NonPositiveRate,
    #[error("noise_sigma must be non-negative")]
    NegativeNoise,
    #[error("learner config json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("learner config i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("batch task index {index} out of range 1..={task_count}")]
    TaskOutOfRange { index: usize, task_count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLearnerConfig {
    /// Per-task loss floor at zero skill; strictly increasing with the
    /// task index.
    pub base_loss: Vec<f64>,
    /// Column k holds the skill increments caused by training on task
    /// k+1. Non-negative, diagonal-dominant.
    pub transfer: Vec<Vec<f64>>,
    pub sim_rate: f64,
    pub noise_sigma: f64,
    pub prerequisite_gating: bool,
    pub prereq_threshold: f64,
    pub seed: u64,
}

impl SimLearnerConfig {
    /// Defaults sized for `task_count` tasks: base losses
    /// `1 + k/K`, identity transfer, rate 0.02, noise 0.01, gating on
    /// with threshold 2.
    pub fn default_for(task_count: usize) -> Self {
        let k = task_count;
        Self {
            base_loss: (0..k).map(|i| 1.0 + (i as f64 + 1.0) / k as f64).collect(),
            transfer: (0..k)
                .map(|row| (0..k).map(|col| if row == col { 1.0 } else { 0.0 }).collect())
                .collect(),
            sim_rate: 0.02,
            noise_sigma: 0.01,
            prerequisite_gating: true,
            prereq_threshold: 2.0,
            seed: 0,
        }
    }

    pub fn task_count(&self) -> usize {
        self.base_loss.len()
    }

    pub fn from_json(json: &str) -> Result<Self, SimLearnerError> {
        let config: Self = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn read_from_file<P: AsRef<std::path::Path>>(path: P) -> Result<Self, SimLearnerError> {
        let json = std::fs::read_to_string(path)?;
        Self::from_json(&json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), SimLearnerError> {
        let k = self.base_loss.len();
        if k == 0 {
            return Err(SimLearnerError::BaseLossLength { got: 0, expected: 1 });
        }
        if self.base_loss.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimLearnerError::BaseLossNotIncreasing);
        }
        if self.transfer.len() != k || self.transfer.iter().any(|row| row.len() != k) {
            return Err(SimLearnerError::TransferShape { k });
        }
        if self.transfer.iter().flatten().any(|&v| v < 0.0) {
            return Err(SimLearnerError::NegativeTransfer);
        }
        for i in 0..k {
            for j in 0..k {
                if i != j && (self.transfer[i][j] > self.transfer[i][i] || self.transfer[i][j] > self.transfer[j][j]) {
                    return Err(SimLearnerError::WeakDiagonal);
                }
            }
        }
        if !(self.sim_rate > 0.0) {
            return Err(SimLearnerError::NonPositiveRate);
        }
        if self.noise_sigma < 0.0 {
            return Err(SimLearnerError::NegativeNoise);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimLearner {
    config: SimLearnerConfig,
    skill: Vec<f64>,
    rng: ChaCha20Rng,
}

impl SimLearner {
    pub fn new(config: SimLearnerConfig) -> Result<Self, SimLearnerError> {
        config.validate()?;
        let seed = config.seed;
        let k = config.task_count();
        Ok(Self { config, skill: vec![0.0; k], rng: ChaCha20Rng::seed_from_u64(seed) })
    }

    pub fn config(&self) -> &SimLearnerConfig {
        &self.config
    }

    pub fn skill(&self) -> &[f64] {
        &self.skill
    }

    fn check_task(&self, index: usize) -> Result<usize, SimLearnerError> {
        let k = self.config.task_count();
        if index == 0 || index > k {
            return Err(SimLearnerError::TaskOutOfRange { index, task_count: k });
        }
        Ok(index - 1)
    }

    /// Loss on a batch from task `index` (1-based) under the current
    /// skill, with seeded observation noise; never negative. Skill is
    /// untouched.
    pub fn eval_loss_for_task(&mut self, index: usize) -> Result<f64, SimLearnerError> {
        let slot = self.check_task(index)?;
        let clean = self.config.base_loss[slot] * (-self.skill[slot]).exp();
        if self.config.noise_sigma == 0.0 {
            return Ok(clean);
        }
        let normal = Normal::new(0.0, self.config.noise_sigma).expect("validated sigma");
        Ok((clean + normal.sample(&mut self.rng)).max(0.0))
    }

    /// One training step on task `index` (1-based): adds the task's
    /// transfer column scaled by `sim_rate`, with the diagonal
    /// increment gated on the previous task's mastery when gating is
    /// enabled.
    pub fn train_on_task(&mut self, index: usize) -> Result<(), SimLearnerError> {
        let slot = self.check_task(index)?;
        let k = self.config.task_count();
        for row in 0..k {
            let mut increment = self.config.sim_rate * self.config.transfer[row][slot];
            if row == slot && slot > 0 && self.config.prerequisite_gating {
                increment *= sigmoid(self.skill[slot - 1] - self.config.prereq_threshold);
            }
            self.skill[row] += increment;
        }
        Ok(())
    }

    /// Noise-free total loss over all tasks; the headline measure of
    /// how far training got.
    pub fn total_loss(&self) -> f64 {
        self.config
            .base_loss
            .iter()
            .zip(&self.skill)
            .map(|(base, skill)| base * (-skill).exp())
            .sum()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Learner for SimLearner {
    fn eval_loss(&mut self, batch: &Batch) -> Result<f64, LearnerError> {
        Ok(self.eval_loss_for_task(batch.task_index)?)
    }

    fn apply_update(&mut self, batch: &Batch) -> Result<(), LearnerError> {
        self.train_on_task(batch.task_index)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(k: usize) -> SimLearnerConfig {
        let mut c = SimLearnerConfig::default_for(k);
        c.noise_sigma = 0.0;
        c.prerequisite_gating = false;
        c
    }

    fn batch(task_index: usize) -> Batch {
        Batch { utterance_ids: vec!["x".to_string()], task_index }
    }

    #[test]
    fn fresh_learner_loss_equals_base() {
        let mut c = config(2);
        c.base_loss = vec![1.5, 2.0];
        let mut learner = SimLearner::new(c).unwrap();
        assert_eq!(learner.eval_loss_for_task(1).unwrap(), 1.5);
        assert_eq!(learner.eval_loss_for_task(2).unwrap(), 2.0);
    }

    #[test]
    fn loss_decays_exponentially_with_skill() {
        let mut learner = SimLearner::new(config(2)).unwrap();
        for _ in 0..10_000 {
            learner.train_on_task(1).unwrap();
        }
        assert!(learner.eval_loss_for_task(1).unwrap() < 1e-12);
    }

    #[test]
    fn noiseless_eval_is_repeat_stable() {
        let mut learner = SimLearner::new(config(3)).unwrap();
        let a = learner.eval_loss_for_task(2).unwrap();
        let b = learner.eval_loss_for_task(2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_transfer_trains_one_skill() {
        let mut c = config(4);
        c.sim_rate = 0.1;
        let mut learner = SimLearner::new(c).unwrap();
        learner.train_on_task(2).unwrap();
        assert_eq!(learner.skill(), &[0.0, 0.1, 0.0, 0.0]);
    }

    #[test]
    fn repeated_training_accumulates_exactly() {
        // a dyadic rate keeps the fp accumulation exact
        let mut c = config(3);
        c.sim_rate = 0.125;
        let mut learner = SimLearner::new(c).unwrap();
        for _ in 0..100 {
            learner.train_on_task(1).unwrap();
        }
        assert_eq!(learner.skill()[0], 12.5);
    }

    #[test]
    fn gating_suppresses_ungated_prerequisites() {
        let mut c = config(3);
        c.prerequisite_gating = true;
        c.prereq_threshold = 2.0;
        c.sim_rate = 1.0;
        let mut learner = SimLearner::new(c).unwrap();
        learner.train_on_task(3).unwrap();
        let expected = sigmoid(-2.0);
        assert!((learner.skill()[2] - expected).abs() < 1e-15);
        // task 1 has no prerequisite and trains at the full rate
        learner.train_on_task(1).unwrap();
        assert_eq!(learner.skill()[0], 1.0);
    }

    #[test]
    fn skill_never_decreases() {
        let mut c = SimLearnerConfig::default_for(4);
        c.noise_sigma = 0.0;
        let mut learner = SimLearner::new(c).unwrap();
        let mut previous = learner.skill().to_vec();
        for i in 0..200 {
            learner.train_on_task(i % 4 + 1).unwrap();
            for (p, s) in previous.iter().zip(learner.skill()) {
                assert!(s >= p);
            }
            previous = learner.skill().to_vec();
        }
    }

    #[test]
    fn noisy_eval_is_seeded() {
        let mut c = SimLearnerConfig::default_for(2);
        c.noise_sigma = 0.05;
        let mut a = SimLearner::new(c.clone()).unwrap();
        let mut b = SimLearner::new(c).unwrap();
        let va: Vec<f64> = (0..20).map(|_| a.eval_loss_for_task(1).unwrap()).collect();
        let vb: Vec<f64> = (0..20).map(|_| b.eval_loss_for_task(1).unwrap()).collect();
        assert_eq!(va, vb);
    }

    #[test]
    fn config_validation_rejects_bad_shapes() {
        let mut c = SimLearnerConfig::default_for(3);
        c.base_loss = vec![1.0, 1.0, 2.0];
        assert!(matches!(c.validate(), Err(SimLearnerError::BaseLossNotIncreasing)));

        let mut c = SimLearnerConfig::default_for(3);
        c.transfer[0][1] = 5.0;
        assert!(matches!(c.validate(), Err(SimLearnerError::WeakDiagonal)));

        let mut c = SimLearnerConfig::default_for(3);
        c.transfer[1][2] = -0.1;
        assert!(matches!(c.validate(), Err(SimLearnerError::NegativeTransfer)));

        let mut c = SimLearnerConfig::default_for(3);
        c.sim_rate = 0.0;
        assert!(matches!(c.validate(), Err(SimLearnerError::NonPositiveRate)));

        let mut c = SimLearnerConfig::default_for(3);
        c.transfer.pop();
        assert!(matches!(c.validate(), Err(SimLearnerError::TransferShape { .. })));
    }

    #[test]
    fn config_json_round_trips() {
        let c = SimLearnerConfig::default_for(5);
        let json = c.to_json();
        let back = SimLearnerConfig::from_json(&json).unwrap();
        assert_eq!(c, back);
        assert!(SimLearnerConfig::from_json("{\"base_loss\":[]}").is_err());
    }

    #[test]
    fn out_of_range_tasks_are_rejected() {
        let mut learner = SimLearner::new(config(2)).unwrap();
        assert!(matches!(learner.eval_loss_for_task(0), Err(SimLearnerError::TaskOutOfRange { .. })));
        assert!(matches!(learner.train_on_task(3), Err(SimLearnerError::TaskOutOfRange { .. })));
    }
}

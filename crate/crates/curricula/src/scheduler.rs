//! The training loop: at each step a bandit picks a task, the learner
//! trains on one batch from that task, and the resulting
//! self-prediction gain — the loss drop on a freshly sampled batch from
//! the same task — is mapped into [-1, 1] and fed back to the bandit.
//!
//! Batches are consumed without replacement. When the chosen task's
//! pool runs dry the scheduler falls back to the non-exhausted task
//! with the highest policy value; when everything is dry it reshuffles
//! all pools and starts a new epoch.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::{Bandit, BanditError, RewardMapper};
use crate::curriculum::{Batch, Curriculum, CurriculumError};
use crate::trace::{RunTrace, TraceRecord};

/// Errors surfaced by learner implementations.
pub type LearnerError = Box<dyn std::error::Error + Send + Sync + 'static>;

/// The training side of the loop. `eval_loss` must not change the
/// learner's parameters; `apply_update` performs exactly one training
/// step on the given batch.
pub trait Learner {
    fn eval_loss(&mut self, batch: &Batch) -> Result<f64, LearnerError>;
    fn apply_update(&mut self, batch: &Batch) -> Result<(), LearnerError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Exp3s,
    SwUcb,
    Uniform,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algorithm::Exp3s => write!(f, "exp3s"),
            Algorithm::SwUcb => write!(f, "swucb"),
            Algorithm::Uniform => write!(f, "uniform"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub total_steps: u64,
    pub algorithm: Algorithm,
    /// Number of tasks; must match both curriculum and bandit.
    #[serde(rename = "k")]
    pub task_count: usize,
    pub bsize: usize,
    /// Batches per full consumption of the curriculum; bookkeeping for
    /// readers of the trace, not a control input.
    pub epoch_length: usize,
    /// Gain-history capacity of the reward mapper.
    pub history_size: usize,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("curriculum has {curriculum} tasks, bandit has {bandit} arms, config says {config}")]
    ConfigMismatch {
        curriculum: usize,
        bandit: usize,
        config: usize,
    },
    #[error("batch belongs to task {batch_task}, expected task {expected}")]
    TaskMismatch { batch_task: usize, expected: usize },
    #[error("trace is empty")]
    EmptyTrace,
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error("learner failed at step {step}: {source}")]
    Learner {
        step: u64,
        source: LearnerError,
        /// Records completed before the failure; absent when the
        /// failure happened outside a run.
        partial: Option<Box<RunTrace>>,
    },
    #[error("bandit rejected feedback at step {step}: {source}")]
    Feedback {
        step: u64,
        source: BanditError,
        partial: Option<Box<RunTrace>>,
    },
}

/// Loss improvement on a held-out batch from task `task_index` caused
/// by one training update on `train_batch`:
///
/// ```text
/// gain = L(B', theta) - L(B', theta')
/// ```
///
/// `B'` is sampled with replacement from the same task, so evaluation
/// never consumes pool state. The learner ends in the post-update
/// state. Negative gains (the update hurt) are passed through.
pub fn self_prediction_gain<L: Learner, R: Rng + ?Sized>(
    learner: &mut L,
    curriculum: &Curriculum,
    task_index: usize,
    train_batch: &Batch,
    rng: &mut R,
) -> Result<f64, ScheduleError> {
    if train_batch.task_index != task_index {
        return Err(ScheduleError::TaskMismatch { batch_task: train_batch.task_index, expected: task_index });
    }
    let eval_batch = curriculum.peek_eval_batch(task_index, rng)?;
    let learner_err = |source| ScheduleError::Learner { step: 0, source, partial: None };
    let before = learner.eval_loss(&eval_batch).map_err(learner_err)?;
    learner.apply_update(train_batch).map_err(learner_err)?;
    let after = learner.eval_loss(&eval_batch).map_err(learner_err)?;
    Ok(before - after)
}

/// Runs the full loop for `config.total_steps` steps and returns the
/// complete trace. On learner failure the error carries the partial
/// trace accumulated so far.
pub fn run_curriculum<L: Learner, R: Rng + ?Sized>(
    curriculum: &mut Curriculum,
    bandit: &mut Bandit,
    learner: &mut L,
    config: &RunConfig,
    rng: &mut R,
) -> Result<RunTrace, ScheduleError> {
    if bandit.arm_count() != curriculum.task_count() || config.task_count != curriculum.task_count() {
        return Err(ScheduleError::ConfigMismatch {
            curriculum: curriculum.task_count(),
            bandit: bandit.arm_count(),
            config: config.task_count,
        });
    }

    let mut mapper = RewardMapper::new(config.history_size.max(1));
    let mut records: Vec<TraceRecord> = Vec::with_capacity(config.total_steps as usize);
    let mut epoch = 1u64;

    let fail = |records: &mut Vec<TraceRecord>, config: &RunConfig| {
        Some(Box::new(RunTrace { config: config.clone(), records: std::mem::take(records) }))
    };

    for step in 1..=config.total_steps {
        let selected = bandit.select(rng);
        let mut chosen = selected;
        let mut fallback_used = false;
        if curriculum.is_exhausted(selected)? {
            match curriculum.fallback_task(&bandit.policy()) {
                Some(substitute) => {
                    chosen = substitute;
                    fallback_used = true;
                }
                None => {
                    // every pool is dry: new epoch, original pick stands
                    curriculum.reset_epoch(rng);
                    epoch += 1;
                }
            }
        }

        let train_batch = curriculum
            .draw_batch(chosen)?
            .expect("chosen task is non-exhausted after fallback or epoch reset");

        let train_loss = match learner.eval_loss(&train_batch) {
            Ok(loss) => loss,
            Err(source) => return Err(ScheduleError::Learner { step, source, partial: fail(&mut records, config) }),
        };

        let raw_gain = match self_prediction_gain(learner, curriculum, chosen, &train_batch, rng) {
            Ok(gain) => gain,
            Err(ScheduleError::Learner { source, .. }) => {
                return Err(ScheduleError::Learner { step, source, partial: fail(&mut records, config) })
            }
            Err(other) => return Err(other),
        };

        let mapped_reward = match mapper.map(raw_gain) {
            Ok(reward) => reward,
            Err(source) => return Err(ScheduleError::Feedback { step, source, partial: fail(&mut records, config) }),
        };
        if let Err(source) = bandit.update(chosen, mapped_reward, train_loss) {
            return Err(ScheduleError::Feedback { step, source, partial: fail(&mut records, config) });
        }

        records.push(TraceRecord {
            step,
            epoch,
            chosen_k: chosen,
            fallback_used,
            raw_gain,
            mapped_reward,
            policy: bandit.policy(),
            train_loss,
        });
    }

    Ok(RunTrace { config: config.clone(), records })
}

/// Arithmetic mean of the policy vectors grouped by epoch, in epoch
/// order.
pub fn export_policy_per_epoch(trace: &RunTrace) -> Result<Vec<(u64, Vec<f64>)>, ScheduleError> {
    if trace.records.is_empty() {
        return Err(ScheduleError::EmptyTrace);
    }
    let k = trace.records[0].policy.len();
    let mut out: Vec<(u64, Vec<f64>)> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for record in &trace.records {
        match out.last_mut() {
            Some((epoch, sums)) if *epoch == record.epoch => {
                for (s, p) in sums.iter_mut().zip(&record.policy) {
                    *s += p;
                }
                *counts.last_mut().expect("counts tracks out") += 1;
            }
            _ => {
                out.push((record.epoch, record.policy.clone()));
                counts.push(1);
            }
        }
        debug_assert_eq!(record.policy.len(), k);
    }
    for ((_, sums), count) in out.iter_mut().zip(counts) {
        for s in sums.iter_mut() {
            *s /= count as f64;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{Exp3sState, SwUcbState};
    use crate::manifest::ScoredUtterance;
    use crate::scoring::Metric;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::cell::RefCell;
    use std::rc::Rc;

    fn make_curriculum(task_count: usize, bsize: usize, batches_per_task: usize, seed: u64) -> Curriculum {
        let n = task_count * bsize * batches_per_task;
        let entries: Vec<ScoredUtterance> = (0..n)
            .map(|i| ScoredUtterance {
                id: format!("u{i:05}"),
                audio: String::new(),
                text: String::new(),
                tokens: None,
                score: Some(i as f64),
            })
            .collect();
        Curriculum::partition(&entries, Metric::SentenceLength, task_count, bsize, seed).unwrap()
    }

    fn config(algorithm: Algorithm, task_count: usize, total_steps: u64) -> RunConfig {
        RunConfig {
            total_steps,
            algorithm,
            task_count,
            bsize: 1,
            epoch_length: 0,
            history_size: 1000,
            seed: 0,
        }
    }

    /// Learner whose loss never changes; gains are exactly zero.
    struct NoOpLearner;
    impl Learner for NoOpLearner {
        fn eval_loss(&mut self, _batch: &Batch) -> Result<f64, LearnerError> {
            Ok(1.0)
        }
        fn apply_update(&mut self, _batch: &Batch) -> Result<(), LearnerError> {
            Ok(())
        }
    }

    /// Loss halves on every update, independent of the batch.
    struct HalvingLearner {
        loss: f64,
    }
    impl Learner for HalvingLearner {
        fn eval_loss(&mut self, _batch: &Batch) -> Result<f64, LearnerError> {
            Ok(self.loss)
        }
        fn apply_update(&mut self, _batch: &Batch) -> Result<(), LearnerError> {
            self.loss /= 2.0;
            Ok(())
        }
    }

    struct WorseningLearner {
        loss: f64,
    }
    impl Learner for WorseningLearner {
        fn eval_loss(&mut self, _batch: &Batch) -> Result<f64, LearnerError> {
            Ok(self.loss)
        }
        fn apply_update(&mut self, _batch: &Batch) -> Result<(), LearnerError> {
            self.loss += 1.0;
            Ok(())
        }
    }

    #[test]
    fn no_op_learner_has_zero_gain() {
        let curriculum = make_curriculum(2, 1, 2, 0);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut learner = NoOpLearner;
        let batch = curriculum.peek_eval_batch(1, &mut rng).unwrap();
        let gain = self_prediction_gain(&mut learner, &curriculum, 1, &batch, &mut rng).unwrap();
        assert_eq!(gain, 0.0);
    }

    #[test]
    fn halving_learner_gain_is_half_the_loss() {
        let curriculum = make_curriculum(2, 1, 2, 0);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut learner = HalvingLearner { loss: 2.0 };
        let batch = curriculum.peek_eval_batch(1, &mut rng).unwrap();
        let gain = self_prediction_gain(&mut learner, &curriculum, 1, &batch, &mut rng).unwrap();
        assert_eq!(gain, 1.0);
    }

    #[test]
    fn worsening_learner_gain_is_negative() {
        let curriculum = make_curriculum(2, 1, 2, 0);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut learner = WorseningLearner { loss: 1.0 };
        let batch = curriculum.peek_eval_batch(2, &mut rng).unwrap();
        let gain = self_prediction_gain(&mut learner, &curriculum, 2, &batch, &mut rng).unwrap();
        assert_eq!(gain, -1.0);
    }

    #[test]
    fn gain_rejects_mismatched_batch() {
        let curriculum = make_curriculum(2, 1, 2, 0);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let batch = curriculum.peek_eval_batch(1, &mut rng).unwrap();
        let err = self_prediction_gain(&mut NoOpLearner, &curriculum, 2, &batch, &mut rng);
        assert!(matches!(err, Err(ScheduleError::TaskMismatch { batch_task: 1, expected: 2 })));
    }

    #[test]
    fn single_step_run_yields_one_record() {
        let mut curriculum = make_curriculum(2, 1, 2, 0);
        let mut bandit = Bandit::Exp3s(Exp3sState::new(2));
        let cfg = config(Algorithm::Exp3s, 2, 1);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let trace = run_curriculum(&mut curriculum, &mut bandit, &mut NoOpLearner, &cfg, &mut rng).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].step, 1);
        assert_eq!(trace.records[0].epoch, 1);
    }

    #[test]
    fn zero_gain_run_keeps_exp3s_exactly_uniform() {
        let mut curriculum = make_curriculum(2, 1, 300, 0);
        let mut bandit = Bandit::Exp3s(Exp3sState::new(2));
        let cfg = config(Algorithm::Exp3s, 2, 500);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let trace = run_curriculum(&mut curriculum, &mut bandit, &mut NoOpLearner, &cfg, &mut rng).unwrap();
        for record in &trace.records {
            assert_eq!(record.raw_gain, 0.0);
            assert_eq!(record.mapped_reward, 0.0);
            for p in &record.policy {
                assert!((p - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn config_mismatch_is_rejected() {
        let mut curriculum = make_curriculum(3, 1, 2, 0);
        let mut bandit = Bandit::Exp3s(Exp3sState::new(2));
        let cfg = config(Algorithm::Exp3s, 3, 1);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(matches!(
            run_curriculum(&mut curriculum, &mut bandit, &mut NoOpLearner, &cfg, &mut rng),
            Err(ScheduleError::ConfigMismatch { .. })
        ));
    }

    // SW-UCB# with a no-op learner is fully deterministic, so this
    // four-step trace over two single-batch tasks can be worked out by
    // hand: forced exploration picks tasks 1 then 2; step 3 ties on
    // equal index values, breaks toward task 2, finds everything
    // exhausted and starts epoch 2; step 4 prefers task 1, whose
    // window count is lower.
    #[test]
    fn two_task_exhaustion_walkthrough() {
        let mut curriculum = make_curriculum(2, 1, 1, 0);
        let mut bandit = Bandit::SwUcb(SwUcbState::new(2));
        let cfg = config(Algorithm::SwUcb, 2, 4);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let trace = run_curriculum(&mut curriculum, &mut bandit, &mut NoOpLearner, &cfg, &mut rng).unwrap();

        let chosen: Vec<usize> = trace.records.iter().map(|r| r.chosen_k).collect();
        assert_eq!(chosen, vec![1, 2, 2, 1]);
        let epochs: Vec<u64> = trace.records.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, vec![1, 1, 2, 2]);
        assert!(trace.records.iter().all(|r| !r.fallback_used));
        assert!(trace.records.iter().all(|r| r.raw_gain == 0.0 && r.mapped_reward == 0.0));
    }

    // With unequal consumption (task 2 exhausted, task 1 not) the
    // substitution path triggers and must be flagged.
    #[test]
    fn fallback_is_flagged_when_substituting() {
        let entries: Vec<ScoredUtterance> = (0..4)
            .map(|i| ScoredUtterance {
                id: format!("u{i}"),
                audio: String::new(),
                text: String::new(),
                tokens: None,
                score: Some(i as f64),
            })
            .collect();
        let mut curriculum = Curriculum::partition(&entries, Metric::SentenceLength, 2, 1, 0).unwrap();
        // consume both batches of task 2 up front so it exhausts first
        curriculum.draw_batch(2).unwrap().unwrap();
        curriculum.draw_batch(2).unwrap().unwrap();

        let mut bandit = Bandit::SwUcb(SwUcbState::new(2));
        let cfg = config(Algorithm::SwUcb, 2, 3);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let trace = run_curriculum(&mut curriculum, &mut bandit, &mut NoOpLearner, &cfg, &mut rng).unwrap();

        // step 1: forced pick task 1. step 2: forced pick task 2 ->
        // exhausted -> fallback to task 1 (only candidate). step 3:
        // everything exhausted -> epoch reset.
        assert_eq!(trace.records[0].chosen_k, 1);
        assert!(!trace.records[0].fallback_used);
        assert_eq!(trace.records[1].chosen_k, 1);
        assert!(trace.records[1].fallback_used);
        assert_eq!(trace.records[2].epoch, 2);
    }

    #[test]
    fn identical_seeds_give_bit_identical_traces() {
        let run = || {
            let mut curriculum = make_curriculum(3, 2, 4, 9);
            let mut bandit = Bandit::Exp3s(Exp3sState::new(3));
            let cfg = config(Algorithm::Exp3s, 3, 60);
            let mut rng = ChaCha20Rng::seed_from_u64(11);
            let mut learner = HalvingLearner { loss: 4.0 };
            run_curriculum(&mut curriculum, &mut bandit, &mut learner, &cfg, &mut rng).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        let mut bytes_a = Vec::new();
        let mut bytes_b = Vec::new();
        a.write_to(&mut bytes_a).unwrap();
        b.write_to(&mut bytes_b).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn no_training_utterance_repeats_within_an_epoch() {
        let log = Rc::new(RefCell::new(CallLog::default()));
        let mut curriculum = make_curriculum(3, 2, 3, 2);
        let mut bandit = Bandit::Exp3s(Exp3sState::new(3));
        let cfg = config(Algorithm::Exp3s, 3, 40);
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let mut learner = InstrumentedLearner { log: Rc::clone(&log) };
        let trace = run_curriculum(&mut curriculum, &mut bandit, &mut learner, &cfg, &mut rng).unwrap();

        // update events line up with trace records one per step
        let events = log.borrow().events.clone();
        let updates: Vec<String> = events
            .iter()
            .filter_map(|e| e.strip_prefix("update:").map(str::to_string))
            .collect();
        assert_eq!(updates.len(), trace.records.len());

        let mut per_epoch: std::collections::HashMap<u64, std::collections::HashSet<String>> =
            std::collections::HashMap::new();
        for (record, ids) in trace.records.iter().zip(&updates) {
            let seen = per_epoch.entry(record.epoch).or_default();
            for id in ids.split(',') {
                assert!(seen.insert(id.to_string()), "utterance {id} trained twice in epoch {}", record.epoch);
            }
        }
    }

    #[test]
    fn epochs_advance_as_pools_drain() {
        // 6 batches per epoch and 18 steps: exactly three epochs
        let mut curriculum = make_curriculum(2, 1, 3, 7);
        let mut bandit = Bandit::SwUcb(SwUcbState::new(2));
        let cfg = config(Algorithm::SwUcb, 2, 18);
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let trace = run_curriculum(&mut curriculum, &mut bandit, &mut NoOpLearner, &cfg, &mut rng).unwrap();
        for (i, record) in trace.records.iter().enumerate() {
            assert_eq!(record.epoch, 1 + i as u64 / 6);
        }
    }

    /// Counts learner calls to verify the eval/update interleaving:
    /// each step must evaluate the held-out batch, apply exactly one
    /// update, then evaluate the same held-out batch again.
    #[derive(Default)]
    struct CallLog {
        events: Vec<String>,
    }

    struct InstrumentedLearner {
        log: Rc<RefCell<CallLog>>,
    }
    impl Learner for InstrumentedLearner {
        fn eval_loss(&mut self, batch: &Batch) -> Result<f64, LearnerError> {
            self.log.borrow_mut().events.push(format!("eval:{}", batch.utterance_ids.join(",")));
            Ok(1.0)
        }
        fn apply_update(&mut self, batch: &Batch) -> Result<(), LearnerError> {
            self.log.borrow_mut().events.push(format!("update:{}", batch.utterance_ids.join(",")));
            Ok(())
        }
    }

    #[test]
    fn eval_update_eval_ordering_holds_every_step() {
        let log = Rc::new(RefCell::new(CallLog::default()));
        let mut curriculum = make_curriculum(2, 1, 5, 1);
        let mut bandit = Bandit::Exp3s(Exp3sState::new(2));
        let cfg = config(Algorithm::Exp3s, 2, 100);
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let mut learner = InstrumentedLearner { log: Rc::clone(&log) };
        run_curriculum(&mut curriculum, &mut bandit, &mut learner, &cfg, &mut rng).unwrap();

        let events = log.borrow().events.clone();
        // four events per step: train-loss eval, held-out eval, update,
        // held-out eval
        assert_eq!(events.len(), 400);
        for step in events.chunks(4) {
            let train = step[0].strip_prefix("eval:").unwrap();
            let before = step[1].strip_prefix("eval:").unwrap().to_string();
            let update = step[2].strip_prefix("update:").unwrap();
            let after = step[3].strip_prefix("eval:").unwrap();
            assert_eq!(train, update, "the update must train on the drawn batch");
            assert_eq!(before, after, "held-out batch must match around the update");
        }
    }

    #[test]
    fn learner_failure_preserves_partial_trace() {
        struct FailingLearner {
            calls: usize,
        }
        impl Learner for FailingLearner {
            fn eval_loss(&mut self, _batch: &Batch) -> Result<f64, LearnerError> {
                self.calls += 1;
                if self.calls > 30 {
                    Err("synthetic failure".into())
                } else {
                    Ok(1.0)
                }
            }
            fn apply_update(&mut self, _batch: &Batch) -> Result<(), LearnerError> {
                Ok(())
            }
        }
        let mut curriculum = make_curriculum(2, 1, 20, 1);
        let mut bandit = Bandit::Exp3s(Exp3sState::new(2));
        let cfg = config(Algorithm::Exp3s, 2, 50);
        let mut rng = ChaCha20Rng::seed_from_u64(29);
        let mut learner = FailingLearner { calls: 0 };
        match run_curriculum(&mut curriculum, &mut bandit, &mut learner, &cfg, &mut rng) {
            Err(ScheduleError::Learner { step, partial, .. }) => {
                let partial = partial.expect("run failures carry the partial trace");
                assert_eq!(partial.records.len() as u64, step - 1);
                assert!(step > 1);
            }
            other => panic!("expected learner failure, got {other:?}"),
        }
    }

    #[test]
    fn policy_means_group_by_epoch() {
        let config = RunConfig {
            total_steps: 4,
            algorithm: Algorithm::Uniform,
            task_count: 2,
            bsize: 1,
            epoch_length: 2,
            history_size: 10,
            seed: 0,
        };
        let record = |step: u64, epoch: u64, policy: Vec<f64>| TraceRecord {
            step,
            epoch,
            chosen_k: 1,
            fallback_used: false,
            raw_gain: 0.0,
            mapped_reward: 0.0,
            policy,
            train_loss: 1.0,
        };
        let trace = RunTrace {
            config,
            records: vec![
                record(1, 1, vec![0.5, 0.5]),
                record(2, 1, vec![0.7, 0.3]),
                record(3, 2, vec![0.9, 0.1]),
                record(4, 2, vec![0.9, 0.1]),
            ],
        };
        let rows = export_policy_per_epoch(&trace).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0, 1);
        assert!((rows[0].1[0] - 0.6).abs() < 1e-12);
        assert_eq!(rows[1].1, vec![0.9, 0.1]);

        let empty = RunTrace { config: trace.config.clone(), records: vec![] };
        assert!(matches!(export_policy_per_epoch(&empty), Err(ScheduleError::EmptyTrace)));
    }
}

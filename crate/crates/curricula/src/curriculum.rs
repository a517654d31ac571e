//! Difficulty-ordered task pools.
//!
//! Scored utterances are sorted by difficulty and split into `K`
//! contiguous blocks of equal size; block `K` holds the hardest
//! examples. Each block becomes a task whose pool is chunked into
//! batches of `bsize`, drawn without replacement until the task is
//! exhausted. Evaluation batches are sampled with replacement and never
//! consume pool state.
//!
//! Task indices are 1-based throughout.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::ScoredUtterance;
use crate::scoring::Metric;

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("need at least {required} scored utterances for K={task_count} x bsize={bsize}, got {available}")]
    InsufficientData {
        required: usize,
        available: usize,
        task_count: usize,
        bsize: usize,
    },
    #[error("utterance `{id}` has no score; run scoring first")]
    MissingScore { id: String },
    #[error("task index {index} out of range 1..={task_count}")]
    TaskIndexOutOfRange { index: usize, task_count: usize },
    #[error("K must be at least 2, got {0}")]
    TooFewTasks(usize),
    #[error("bsize must be at least 1")]
    ZeroBatchSize,
    #[error("invalid curriculum document: {0}")]
    InvalidDocument(String),
    #[error("curriculum json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A fixed-size group of utterance ids drawn from one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub utterance_ids: Vec<String>,
    /// 1-based index of the task this batch was drawn from.
    pub task_index: usize,
}

/// One difficulty block: a fixed utterance pool plus the current
/// epoch's batch order and consumption cursor.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    index: usize,
    pool: Vec<String>,
    batches: Vec<Batch>,
    cursor: usize,
}

impl Task {
    pub fn index(&self) -> usize {
        self.index
    }

    /// Utterance ids in canonical (difficulty-sorted) order.
    pub fn pool(&self) -> &[String] {
        &self.pool
    }

    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn is_exhausted(&self) -> bool {
        self.cursor >= self.batches.len()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CurriculumDoc {
    metric: Metric,
    k: usize,
    bsize: usize,
    seed: u64,
    tasks: Vec<Vec<String>>,
}

/// K ordered task pools with equal batch counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Curriculum {
    metric: Metric,
    bsize: usize,
    seed: u64,
    tasks: Vec<Task>,
}

impl Curriculum {
    /// Sorts `scored` by difficulty (orientation taken from `metric`),
    /// splits it into `task_count` equal blocks with the hardest block
    /// last, and chunks each block into seeded batches. Utterances that
    /// cannot fill one batch per task are discarded from the hard end
    /// of the ordering; the count is logged.
    pub fn partition(
        scored: &[ScoredUtterance],
        metric: Metric,
        task_count: usize,
        bsize: usize,
        seed: u64,
    ) -> Result<Self, CurriculumError> {
        if task_count < 2 {
            return Err(CurriculumError::TooFewTasks(task_count));
        }
        if bsize == 0 {
            return Err(CurriculumError::ZeroBatchSize);
        }
        if scored.len() < task_count * bsize {
            return Err(CurriculumError::InsufficientData {
                required: task_count * bsize,
                available: scored.len(),
                task_count,
                bsize,
            });
        }

        let mut keyed: Vec<(f64, &str)> = Vec::with_capacity(scored.len());
        for entry in scored {
            let score = entry.score.ok_or_else(|| CurriculumError::MissingScore { id: entry.id.clone() })?;
            keyed.push((metric.difficulty(score), &entry.id));
        }
        // Stable order on (difficulty, id) so boundary ties are deterministic.
        keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(b.1)));

        let batches_per_task = scored.len() / (task_count * bsize);
        let block = batches_per_task * bsize;
        let usable = block * task_count;
        let discarded = scored.len() - usable;
        if discarded > 0 {
            log::warn!("discarding {discarded} utterances that cannot fill one batch per task");
        }

        let tasks = (0..task_count)
            .map(|i| Task {
                index: i + 1,
                pool: keyed[i * block..(i + 1) * block].iter().map(|(_, id)| (*id).to_string()).collect(),
                batches: Vec::new(),
                cursor: 0,
            })
            .collect();

        let mut curriculum = Self { metric, bsize, seed, tasks };
        curriculum.rebuild_batches(&mut ChaCha20Rng::seed_from_u64(seed));
        Ok(curriculum)
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn bsize(&self) -> usize {
        self.bsize
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn batches_per_task(&self) -> usize {
        self.tasks[0].batch_count()
    }

    pub fn utterance_count(&self) -> usize {
        self.tasks.iter().map(|t| t.pool.len()).sum()
    }

    fn task(&self, index: usize) -> Result<&Task, CurriculumError> {
        if index == 0 || index > self.tasks.len() {
            return Err(CurriculumError::TaskIndexOutOfRange { index, task_count: self.tasks.len() });
        }
        Ok(&self.tasks[index - 1])
    }

    pub fn is_exhausted(&self, index: usize) -> Result<bool, CurriculumError> {
        Ok(self.task(index)?.is_exhausted())
    }

    pub fn all_exhausted(&self) -> bool {
        self.tasks.iter().all(Task::is_exhausted)
    }

    /// Next unconsumed batch of task `index`, advancing its cursor;
    /// `None` once the task is exhausted for this epoch.
    pub fn draw_batch(&mut self, index: usize) -> Result<Option<Batch>, CurriculumError> {
        self.task(index)?;
        let task = &mut self.tasks[index - 1];
        if task.is_exhausted() {
            return Ok(None);
        }
        let batch = task.batches[task.cursor].clone();
        task.cursor += 1;
        Ok(Some(batch))
    }

    /// A uniformly random batch from task `index`, sampled with
    /// replacement; the consumption cursor is untouched.
    pub fn peek_eval_batch<R: Rng + ?Sized>(&self, index: usize, rng: &mut R) -> Result<Batch, CurriculumError> {
        let task = self.task(index)?;
        let pick = rng.random_range(0..task.batches.len());
        Ok(task.batches[pick].clone())
    }

    /// Highest-policy task that still has unconsumed batches, ties
    /// broken toward the larger (harder) index. `None` when every task
    /// is exhausted. `policy` must have one entry per task.
    pub fn fallback_task(&self, policy: &[f64]) -> Option<usize> {
        assert_eq!(policy.len(), self.tasks.len(), "policy length must equal the task count");
        let mut best = None;
        let mut best_value = f64::NEG_INFINITY;
        for (task, &value) in self.tasks.iter().zip(policy) {
            if !task.is_exhausted() && value >= best_value {
                best_value = value;
                best = Some(task.index);
            }
        }
        best
    }

    /// Starts a new epoch: resets every cursor and reshuffles batch
    /// membership within each task. Task membership never changes.
    pub fn reset_epoch<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.rebuild_batches(rng);
    }

    fn rebuild_batches<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let bsize = self.bsize;
        for task in &mut self.tasks {
            let mut ids = task.pool.clone();
            ids.shuffle(rng);
            task.batches = ids
                .chunks(bsize)
                .map(|chunk| Batch { utterance_ids: chunk.to_vec(), task_index: task.index })
                .collect();
            task.cursor = 0;
        }
    }

    /// Serializes the curriculum definition (metric, K, bsize, seed and
    /// per-task pools). Batch state is reconstructed from the seed on
    /// import, so a fresh import equals a fresh partition.
    pub fn to_json(&self) -> String {
        let doc = CurriculumDoc {
            metric: self.metric,
            k: self.tasks.len(),
            bsize: self.bsize,
            seed: self.seed,
            tasks: self.tasks.iter().map(|t| t.pool.clone()).collect(),
        };
        serde_json::to_string(&doc).expect("curriculum doc serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, CurriculumError> {
        let doc: CurriculumDoc = serde_json::from_str(json)?;
        if doc.k < 2 {
            return Err(CurriculumError::TooFewTasks(doc.k));
        }
        if doc.bsize == 0 {
            return Err(CurriculumError::ZeroBatchSize);
        }
        if doc.tasks.len() != doc.k {
            return Err(CurriculumError::InvalidDocument(format!(
                "k is {} but {} task pools are present",
                doc.k,
                doc.tasks.len()
            )));
        }
        let pool_len = doc.tasks.first().map(Vec::len).unwrap_or(0);
        if pool_len == 0 || pool_len % doc.bsize != 0 {
            return Err(CurriculumError::InvalidDocument(format!(
                "task pool size {pool_len} is not a positive multiple of bsize {}",
                doc.bsize
            )));
        }
        if doc.tasks.iter().any(|t| t.len() != pool_len) {
            return Err(CurriculumError::InvalidDocument("task pools have unequal sizes".to_string()));
        }
        let mut seen = HashSet::new();
        for id in doc.tasks.iter().flatten() {
            if !seen.insert(id.as_str()) {
                return Err(CurriculumError::InvalidDocument(format!("utterance `{id}` appears in two tasks")));
            }
        }

        let tasks = doc
            .tasks
            .into_iter()
            .enumerate()
            .map(|(i, pool)| Task { index: i + 1, pool, batches: Vec::new(), cursor: 0 })
            .collect();
        let mut curriculum = Self { metric: doc.metric, bsize: doc.bsize, seed: doc.seed, tasks };
        curriculum.rebuild_batches(&mut ChaCha20Rng::seed_from_u64(doc.seed));
        Ok(curriculum)
    }
}

//! Curriculum scheduling for sequence-model training.
//!
//! The pipeline: score training examples by difficulty (audio
//! compression ratio, sentence length, or sentence norm), sort and
//! split them into `K` equal tasks from easiest to hardest, then let a
//! non-stationary bandit (EXP3.S or SW-UCB#) decide which task to draw
//! the next batch from, rewarding it with the self-prediction gain each
//! update produces. A simulated learner makes the whole loop testable
//! end to end without training a real model.
//!
//! Entry points:
//!
//! * [`scoring`] — difficulty metrics over audio payloads and token
//!   sequences.
//! * [`curriculum`] — partitioning and without-replacement batch pools.
//! * [`bandit`] — EXP3.S, SW-UCB# and the reward mapper.
//! * [`scheduler`] — the training loop and trace export.
//! * [`simlearner`] — the synthetic learner.
//! * [`audio`], [`manifest`], [`embedding`], [`trace`] — file formats
//!   and codecs.

pub mod audio;
pub mod bandit;
pub mod curriculum;
pub mod embedding;
pub mod manifest;
pub mod scheduler;
pub mod scoring;
pub mod simlearner;
pub mod trace;

pub use audio::AudioSample;
pub use bandit::{Bandit, EnvironmentMode, Exp3sState, RewardMapper, SwUcbState};
pub use curriculum::{Batch, Curriculum, Task};
pub use embedding::EmbeddingTable;
pub use manifest::ScoredUtterance;
pub use scheduler::{Algorithm, Learner, RunConfig};
pub use scoring::Metric;
pub use simlearner::{SimLearner, SimLearnerConfig};
pub use trace::{RunTrace, TraceRecord};

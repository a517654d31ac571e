//! Adaptive reward mapping.
//!
//! Raw progress gains have whatever magnitude the loss happens to have,
//! which shrinks over training. The mapper keeps a bounded FIFO of
//! recent gains and rescales each new gain linearly so the 20th
//! percentile of the history maps to -1 and the 80th to +1, clamping
//! the rest. This keeps the reward signal in [-1, 1] regardless of loss
//! scale.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::BanditError;

/// Default gain-history capacity.
pub const DEFAULT_HISTORY_SIZE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardMapper {
    history: VecDeque<f64>,
    capacity: usize,
    q_lo: f64,
    q_hi: f64,
}

impl Default for RewardMapper {
    fn default() -> Self {
        Self::new(DEFAULT_HISTORY_SIZE)
    }
}

impl RewardMapper {
    /// Mapper with 20/80 percentile anchors and the given history size.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "history capacity must be positive");
        Self { history: VecDeque::new(), capacity, q_lo: 0.2, q_hi: 0.8 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Records `gain` (evicting beyond capacity) and maps it into
    /// [-1, 1] against the updated history percentiles. Degenerate
    /// histories (equal percentiles) map to 0.
    pub fn map(&mut self, gain: f64) -> Result<f64, BanditError> {
        if !gain.is_finite() {
            return Err(BanditError::NonFiniteGain { value: gain });
        }
        self.history.push_back(gain);
        while self.history.len() > self.capacity {
            self.history.pop_front();
        }

        let mut sorted: Vec<f64> = self.history.iter().copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("gains are finite"));
        let lo = percentile(&sorted, self.q_lo);
        let hi = percentile(&sorted, self.q_hi);
        if hi == lo {
            return Ok(0.0);
        }
        Ok((2.0 * (gain - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
    }
}

/// Linear-interpolation percentile of a sorted slice (the convention
/// where rank `q * (n - 1)` is interpolated between neighbours).
fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() as f64 - 1.0);
    let lower = pos.floor() as usize;
    let frac = pos - lower as f64;
    if lower + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[lower] + frac * (sorted[lower + 1] - sorted[lower])
    }
}

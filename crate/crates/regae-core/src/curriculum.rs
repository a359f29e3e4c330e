//! Curriculum over growing subgraph windows.
//!
//! Training starts on short contiguous windows of the canonical order and
//! widens them whenever the teacher-forced train F1 clears a threshold,
//! until whole graphs are used.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    /// Current window fraction in (0, 1].
    pub fraction: f64,
    /// Train-F1 value that triggers the next widening.
    pub threshold: f64,
    /// Fraction increment per trigger.
    pub step: f64,
    /// Smallest window in vertices.
    pub min_size: usize,
}

impl CurriculumState {
    pub fn new(start: f64, threshold: f64, step: f64, min_size: usize) -> Self {
        assert!(
            start > 0.0 && start <= 1.0,
            "curriculum start fraction must be in (0, 1]"
        );
        assert!(step > 0.0, "curriculum step must be positive");
        CurriculumState {
            fraction: start,
            threshold,
            step,
            min_size,
        }
    }

    /// Advances the fraction when quality clears the threshold; the fraction
    /// never decreases and saturates at 1.
    pub fn tick(&self, train_f1: f64) -> CurriculumState {
        let mut next = self.clone();
        if train_f1 >= self.threshold && self.fraction < 1.0 {
            next.fraction = (self.fraction + self.step).min(1.0);
        }
        next
    }

    /// Window size for a graph with `n` vertices, never exceeding `n`.
    pub fn window_size(&self, n: usize) -> usize {
        let want = (self.fraction * n as f64).ceil() as usize;
        want.max(self.min_size).min(n)
    }
}

impl Default for CurriculumState {
    fn default() -> Self {
        CurriculumState::new(0.25, 0.8, 0.25, 2)
    }
}

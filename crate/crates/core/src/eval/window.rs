use std::collections::VecDeque;

use serde::Serialize;

use crate::changedetect::AdaptiveWindow;
use crate::instance::{Label, NUM_CLASSES};

use super::confusion::ConfusionMatrix;

pub const DEFAULT_WINDOW: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub instances_seen: u64,
    pub instances_in_window: u64,
    pub accuracy: Option<f64>,
    pub kappa: Option<f64>,
    /// Instances per second since the first record; absent when unknown.
    pub throughput: Option<f64>,
}

/// Prequential evaluator over the last `w` (predicted, actual) pairs, with
/// an optional drift detector fed the correctness bit of every record.
#[derive(Clone, Debug)]
pub struct SlidingWindowEvaluator {
    window: usize,
    pairs: VecDeque<(Label, Label)>,
    matrix: ConfusionMatrix,
    seen: u64,
    detector: Option<AdaptiveWindow>,
    drifts: Vec<u64>,
}

impl SlidingWindowEvaluator {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1, "window must be positive");
        Self {
            window,
            pairs: VecDeque::with_capacity(window.min(1 << 16)),
            matrix: ConfusionMatrix::new(NUM_CLASSES),
            seen: 0,
            detector: None,
            drifts: Vec::new(),
        }
    }

    pub fn with_detector(mut self, detector: AdaptiveWindow) -> Self {
        self.detector = Some(detector);
        self
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn matrix(&self) -> &ConfusionMatrix {
        &self.matrix
    }

    /// Instance counts (1-based) at which the detector fired.
    pub fn drifts(&self) -> &[u64] {
        &self.drifts
    }

    /// Returns whether the drift detector fired on this record.
    pub fn record(&mut self, predicted: Label, actual: Label) -> bool {
        self.seen += 1;
        self.pairs.push_back((predicted, actual));
        self.matrix.add(actual.index(), predicted.index());
        if self.pairs.len() > self.window {
            let (p, a) = self.pairs.pop_front().expect("window is non-empty");
            self.matrix.remove(a.index(), p.index());
        }
        let correct = if predicted == actual { 1.0 } else { 0.0 };
        let fired = self
            .detector
            .as_mut()
            .is_some_and(|d| d.update(correct).expect("correctness bit is in range"));
        if fired {
            self.drifts.push(self.seen);
        }
        fired
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            instances_seen: self.seen,
            instances_in_window: self.matrix.total(),
            accuracy: self.matrix.accuracy(),
            kappa: self.matrix.kappa().ok(),
            throughput: None,
        }
    }

    /// Window counts per class, in [`Label::ALL`] order.
    pub fn actual_distribution(&self) -> [u64; NUM_CLASSES] {
        std::array::from_fn(|c| self.matrix.actual_marginal(c))
    }

    pub fn predicted_distribution(&self) -> [u64; NUM_CLASSES] {
        std::array::from_fn(|c| self.matrix.predicted_marginal(c))
    }

    pub fn state_bytes(&self) -> usize {
        self.window * std::mem::size_of::<(Label, Label)>() + NUM_CLASSES * NUM_CLASSES * 8
    }
}

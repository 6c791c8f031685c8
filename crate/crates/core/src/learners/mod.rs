//! Sequential online classifiers: multinomial Naive Bayes and the
//! Hoeffding tree, plus the split mathematics both tree learners share.

pub mod hoeffding_tree;
pub mod naive_bayes;
pub mod split;
pub mod tree;

use serde::Serialize;
use thiserror::Error;

use crate::instance::{ClassCounts, Label, SparseInstance, NUM_CLASSES};

pub use hoeffding_tree::{HoeffdingTree, LeafStats, TreeParams};
pub use naive_bayes::NaiveBayes;
pub use split::{entropy, hoeffding_bound, info_gain, split_decision, SplitCandidate, TopTwo};
pub use tree::{ShapeNode, Tree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearnerError {
    #[error("training instance has no label")]
    Unlabeled,
    #[error("model has not been trained")]
    Untrained,
}

/// One-pass classifier that can predict at any time.
pub trait OnlineLearner: Send {
    fn name(&self) -> &'static str;
    fn predict(&self, x: &SparseInstance) -> Label;
    fn train(&mut self, x: &SparseInstance) -> Result<(), LearnerError>;
    fn summary(&self) -> ModelSummary;
    /// Approximate size of the model state in bytes.
    fn state_bytes(&self) -> usize;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSummary {
    pub learner: String,
    pub node_count: usize,
    pub depth: usize,
    pub leaf_count: usize,
    /// Fraction of training instances per class, in [`Label::ALL`] order.
    pub class_priors: [f64; NUM_CLASSES],
    pub trained: u64,
}

impl ModelSummary {
    pub fn for_tree(learner: &str, node_count: usize, depth: usize, leaf_count: usize, seen: &ClassCounts) -> Self {
        let trained: u64 = seen.iter().sum();
        let mut class_priors = [0.0; NUM_CLASSES];
        if trained > 0 {
            for (p, &c) in class_priors.iter_mut().zip(seen) {
                *p = c as f64 / trained as f64;
            }
        }
        Self {
            learner: learner.to_string(),
            node_count,
            depth,
            leaf_count,
            class_priors,
            trained,
        }
    }
}

//! Sequential Hoeffding tree (VFDT) over binarised sparse attributes.

use std::collections::HashMap;

use crate::instance::{ClassCounts, Label, SparseInstance, NUM_CLASSES};

use super::split::{info_gain, is_pure, split_decision, SplitCandidate, TopTwo};
use super::tree::{LeafData, Node, ShapeNode, Tree};
use super::{LearnerError, ModelSummary, OnlineLearner};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeParams {
    /// Split confidence δ.
    pub split_delta: f64,
    /// Tie threshold τ.
    pub tie_threshold: f64,
    /// Grace period n_min.
    pub grace_period: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            split_delta: 1e-7,
            tie_threshold: 0.05,
            grace_period: 200,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct LeafStats {
    pub class_counts: ClassCounts,
    /// Per observed attribute: class counts of observations where it was
    /// present. Absence counts are `class_counts - present`.
    pub present: HashMap<u32, ClassCounts>,
    pub since_attempt: u64,
}

impl LeafData for LeafStats {
    fn class_counts(&self) -> &ClassCounts {
        &self.class_counts
    }
}

impl LeafStats {
    /// Best and second-best attributes by information gain.
    pub fn best_two(&self) -> TopTwo {
        let mut top = TopTwo::default();
        for (&attribute, present) in &self.present {
            top.offer(SplitCandidate {
                attribute,
                gain: info_gain(&self.class_counts, present),
            });
        }
        top
    }
}

#[derive(Clone, Debug)]
pub struct HoeffdingTree {
    params: TreeParams,
    tree: Tree<LeafStats>,
    seen: ClassCounts,
    split_attempts: u64,
}

impl HoeffdingTree {
    pub fn new(params: TreeParams) -> Self {
        Self {
            params,
            tree: Tree::new(LeafStats::default()),
            seen: [0; NUM_CLASSES],
            split_attempts: 0,
        }
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn tree(&self) -> &Tree<LeafStats> {
        &self.tree
    }

    pub fn shape(&self) -> Vec<ShapeNode> {
        self.tree.shape()
    }

    pub fn split_attempts(&self) -> u64 {
        self.split_attempts
    }

    pub fn train(&mut self, x: &SparseInstance) -> Result<(), LearnerError> {
        let label = x.label.ok_or(LearnerError::Unlabeled)?;
        let c = label.index();
        self.seen[c] += 1;
        let id = self.tree.sort(x);
        let leaf = self.tree.leaf_mut(id).expect("sort ends at a leaf");
        leaf.class_counts[c] += 1;
        for &(a, w) in x.features() {
            let counts = leaf.present.entry(a).or_default();
            if w > 0.0 {
                counts[c] += 1;
            }
        }
        leaf.since_attempt += 1;
        if leaf.since_attempt >= self.params.grace_period && !is_pure(&leaf.class_counts) {
            leaf.since_attempt = 0;
            self.attempt_split(id);
        }
        Ok(())
    }

    fn attempt_split(&mut self, id: usize) {
        self.split_attempts += 1;
        let leaf = self.tree.leaf(id).expect("attempt on a leaf");
        let n: u64 = leaf.class_counts.iter().sum();
        let decision = split_decision(
            &leaf.best_two(),
            &leaf.class_counts,
            self.params.split_delta,
            self.params.tie_threshold,
            n,
        );
        if let Some(attribute) = decision {
            self.tree.split(id, attribute, LeafStats::default(), LeafStats::default());
        }
    }

    pub fn predict(&self, x: &SparseInstance) -> Label {
        self.tree.predict(x)
    }

    pub fn state_bytes(&self) -> usize {
        let per_entry = std::mem::size_of::<(u32, ClassCounts)>();
        self.tree.node_count() * std::mem::size_of::<Node<LeafStats>>()
            + self.tree.leaves().map(|(_, l)| l.present.len() * per_entry).sum::<usize>()
    }
}

impl OnlineLearner for HoeffdingTree {
    fn name(&self) -> &'static str {
        "ht"
    }

    fn predict(&self, x: &SparseInstance) -> Label {
        HoeffdingTree::predict(self, x)
    }

    fn train(&mut self, x: &SparseInstance) -> Result<(), LearnerError> {
        HoeffdingTree::train(self, x)
    }

    fn summary(&self) -> ModelSummary {
        ModelSummary::for_tree("ht", self.tree.node_count(), self.tree.depth(), self.tree.leaf_count(), &self.seen)
    }

    fn state_bytes(&self) -> usize {
        HoeffdingTree::state_bytes(self)
    }
}

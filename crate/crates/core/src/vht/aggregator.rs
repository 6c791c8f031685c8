//! Model aggregator: owns the tree structure and leaf class counts,
//! delegates attribute statistics to the local tier.

use std::collections::BTreeMap;

use crate::instance::{ClassCounts, Label, SparseInstance, NUM_CLASSES};
use crate::learners::split::{is_pure, split_decision};
use crate::learners::tree::{LeafData, ShapeNode, Tree};
use crate::learners::{LearnerError, ModelSummary, TopTwo, TreeParams};

use super::events::{AggregatorOutput, AttributeEvent, ComputeEvent, DropLeafEvent, LocalResultEvent};

/// Events of inactivity after which a pending attempt is decided with the
/// results received so far, in concurrent runs.
pub const DEFAULT_TIMEOUT_EVENTS: u64 = 2000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VhtParams {
    pub tree: TreeParams,
    /// Number of local-statistics instances.
    pub parallelism: usize,
    /// `None` disables timeouts.
    pub timeout_events: Option<u64>,
}

impl VhtParams {
    pub fn new(tree: TreeParams, parallelism: usize) -> Self {
        Self {
            tree,
            parallelism,
            timeout_events: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AggregatorLeaf {
    pub class_counts: ClassCounts,
    pub since_attempt: u64,
    /// Last attempt id issued for this leaf.
    pub attempt: u64,
}

impl LeafData for AggregatorLeaf {
    fn class_counts(&self) -> &ClassCounts {
        &self.class_counts
    }
}

#[derive(Clone, Debug)]
struct SplittingLeaf {
    attempt: u64,
    class_counts: ClassCounts,
    best: TopTwo,
    responders: usize,
    deadline: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AggregatorCounters {
    pub attempts: u64,
    pub splits: u64,
    pub timeouts: u64,
    pub stale_results: u64,
}

/// Outcome of closing a split attempt.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitOutcome {
    pub leaf: usize,
    /// Split attribute and the (present, absent) children, if the leaf split.
    pub split: Option<(u32, usize, usize)>,
    pub outputs: Vec<AggregatorOutput>,
}

#[derive(Clone, Debug)]
pub struct ModelAggregator {
    params: VhtParams,
    tree: Tree<AggregatorLeaf>,
    splitting: BTreeMap<usize, SplittingLeaf>,
    clock: u64,
    seen: ClassCounts,
    counters: AggregatorCounters,
}

impl ModelAggregator {
    pub fn new(params: VhtParams) -> Self {
        assert!(params.parallelism >= 1, "parallelism must be positive");
        Self {
            params,
            tree: Tree::new(AggregatorLeaf::default()),
            splitting: BTreeMap::new(),
            clock: 0,
            seen: [0; NUM_CLASSES],
            counters: AggregatorCounters::default(),
        }
    }

    pub fn params(&self) -> &VhtParams {
        &self.params
    }

    pub fn tree(&self) -> &Tree<AggregatorLeaf> {
        &self.tree
    }

    pub fn shape(&self) -> Vec<ShapeNode> {
        self.tree.shape()
    }

    pub fn counters(&self) -> AggregatorCounters {
        self.counters
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn is_splitting(&self, leaf: usize) -> bool {
        self.splitting.contains_key(&leaf)
    }

    pub fn pending_attempts(&self) -> usize {
        self.splitting.len()
    }

    pub fn predict(&self, x: &SparseInstance) -> Label {
        self.tree.predict(x)
    }

    /// Test-then-train: the prediction is made before `x` updates the
    /// model. Emits one attribute event per feature and, when the leaf is
    /// due, a compute request.
    pub fn aggregate_instance(&mut self, x: &SparseInstance) -> Result<(Label, Vec<AggregatorOutput>), LearnerError> {
        let label = x.label.ok_or(LearnerError::Unlabeled)?;
        let prediction = self.tree.predict(x);
        let c = label.index();
        self.seen[c] += 1;
        let leaf = self.tree.sort(x);
        let mut out = Vec::with_capacity(x.len() + 1);
        for &(attribute, w) in x.features() {
            out.push(AggregatorOutput::Attribute(AttributeEvent {
                leaf,
                attribute,
                present: w > 0.0,
                class: label,
            }));
        }
        let state = self.tree.leaf_mut(leaf).expect("sort ends at a leaf");
        state.class_counts[c] += 1;
        state.since_attempt += 1;
        let due = state.since_attempt >= self.params.tree.grace_period && !is_pure(&state.class_counts);
        if due && !self.splitting.contains_key(&leaf) {
            state.since_attempt = 0;
            state.attempt += 1;
            let compute = ComputeEvent {
                leaf,
                attempt: state.attempt,
                class_counts: state.class_counts,
            };
            self.splitting.insert(
                leaf,
                SplittingLeaf {
                    attempt: compute.attempt,
                    class_counts: compute.class_counts,
                    best: TopTwo::default(),
                    responders: 0,
                    deadline: self.params.timeout_events.map(|t| self.clock + t),
                },
            );
            self.counters.attempts += 1;
            out.push(AggregatorOutput::Compute(compute));
        }
        Ok((prediction, out))
    }

    /// Merges a local result; closes the attempt once every local instance
    /// has answered. Results for unknown or superseded attempts are ignored.
    pub fn receive_local_result(&mut self, ev: &LocalResultEvent) -> Option<SplitOutcome> {
        let Some(entry) = self.splitting.get_mut(&ev.leaf) else {
            self.counters.stale_results += 1;
            return None;
        };
        if entry.attempt != ev.attempt {
            self.counters.stale_results += 1;
            return None;
        }
        entry.best.merge(&ev.top_two());
        entry.responders += 1;
        if let Some(d) = entry.deadline.as_mut() {
            *d = self.clock + self.params.timeout_events.unwrap_or(0);
        }
        (entry.responders >= self.params.parallelism).then(|| self.close(ev.leaf))
    }

    /// Advances the logical clock by one event and closes every attempt
    /// whose deadline has passed.
    pub fn tick(&mut self) -> Vec<SplitOutcome> {
        self.clock += 1;
        self.handle_timeout(self.clock)
    }

    pub fn handle_timeout(&mut self, now: u64) -> Vec<SplitOutcome> {
        let expired: Vec<usize> = self
            .splitting
            .iter()
            .filter(|(_, s)| s.deadline.is_some_and(|d| d < now))
            .map(|(&leaf, _)| leaf)
            .collect();
        expired
            .into_iter()
            .map(|leaf| {
                self.counters.timeouts += 1;
                self.close(leaf)
            })
            .collect()
    }

    fn close(&mut self, leaf: usize) -> SplitOutcome {
        let s = self.splitting.remove(&leaf).expect("closing an open attempt");
        let n: u64 = s.class_counts.iter().sum();
        let decision = split_decision(
            &s.best,
            &s.class_counts,
            self.params.tree.split_delta,
            self.params.tree.tie_threshold,
            n,
        );
        match decision {
            Some(attribute) => {
                let (present, absent) =
                    self.tree
                        .split(leaf, attribute, AggregatorLeaf::default(), AggregatorLeaf::default());
                self.counters.splits += 1;
                SplitOutcome {
                    leaf,
                    split: Some((attribute, present, absent)),
                    outputs: vec![AggregatorOutput::Drop(DropLeafEvent { leaf })],
                }
            }
            None => SplitOutcome {
                leaf,
                split: None,
                outputs: Vec::new(),
            },
        }
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary::for_tree(
            "vht",
            self.tree.node_count(),
            self.tree.depth(),
            self.tree.leaf_count(),
            &self.seen,
        )
    }

    pub fn state_bytes(&self) -> usize {
        self.tree.node_count() * std::mem::size_of::<crate::learners::tree::Node<AggregatorLeaf>>()
            + self.splitting.len() * std::mem::size_of::<(usize, SplittingLeaf)>()
    }
}

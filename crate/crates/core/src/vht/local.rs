//! One shard of the per-leaf attribute statistics.

use std::collections::HashMap;

use crate::instance::ClassCounts;
use crate::learners::{info_gain, SplitCandidate, TopTwo};

use super::events::{AttributeEvent, ComputeEvent, LocalResultEvent};

#[derive(Clone, Debug, Default)]
pub struct LocalStatistics {
    index: usize,
    /// leaf -> attribute -> class counts where the attribute was present
    leaves: HashMap<usize, HashMap<u32, ClassCounts>>,
}

impl LocalStatistics {
    pub fn new(index: usize) -> Self {
        Self {
            index,
            leaves: HashMap::new(),
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn local_update(&mut self, ev: &AttributeEvent) {
        let counts = self.leaves.entry(ev.leaf).or_default().entry(ev.attribute).or_default();
        if ev.present {
            counts[ev.class.index()] += 1;
        }
    }

    pub fn local_compute(&self, ev: &ComputeEvent) -> LocalResultEvent {
        let mut top = TopTwo::default();
        if let Some(attrs) = self.leaves.get(&ev.leaf) {
            for (&attribute, present) in attrs {
                top.offer(SplitCandidate {
                    attribute,
                    gain: info_gain(&ev.class_counts, present),
                });
            }
        }
        LocalResultEvent {
            leaf: ev.leaf,
            attempt: ev.attempt,
            best: top.best,
            second: top.second,
            responder: self.index,
        }
    }

    pub fn drop_leaf(&mut self, leaf: usize) {
        self.leaves.remove(&leaf);
    }

    pub fn present_counts(&self, leaf: usize, attribute: u32) -> Option<&ClassCounts> {
        self.leaves.get(&leaf)?.get(&attribute)
    }

    pub fn attributes(&self, leaf: usize) -> impl Iterator<Item = (u32, &ClassCounts)> {
        self.leaves.get(&leaf).into_iter().flatten().map(|(&a, c)| (a, c))
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn state_bytes(&self) -> usize {
        let per_entry = std::mem::size_of::<(u32, ClassCounts)>();
        self.leaves.values().map(|m| 16 + m.len() * per_entry).sum()
    }
}

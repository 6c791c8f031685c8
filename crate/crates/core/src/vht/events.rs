use serde::{Deserialize, Serialize};

use crate::instance::{ClassCounts, Label};
use crate::learners::{SplitCandidate, TopTwo};

/// One feature of a training instance, routed by attribute id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeEvent {
    pub leaf: usize,
    pub attribute: u32,
    /// Weight > 0.
    pub present: bool,
    pub class: Label,
}

impl AttributeEvent {
    pub fn routing_key(&self) -> Vec<u8> {
        attribute_key(self.attribute)
    }
}

pub fn attribute_key(attribute: u32) -> Vec<u8> {
    attribute.to_le_bytes().to_vec()
}

/// Request for the local best two attributes of a leaf. Carries the leaf's
/// class totals so absence counts can be derived locally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComputeEvent {
    pub leaf: usize,
    pub attempt: u64,
    pub class_counts: ClassCounts,
}

/// Tells every local-statistics instance to forget a leaf that was split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropLeafEvent {
    pub leaf: usize,
}

/// Local answer to a [`ComputeEvent`]. Missing candidates stand for the
/// empty-result marker (gain -inf).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalResultEvent {
    pub leaf: usize,
    pub attempt: u64,
    pub best: Option<SplitCandidate>,
    pub second: Option<SplitCandidate>,
    pub responder: usize,
}

impl LocalResultEvent {
    pub fn is_empty_marker(&self) -> bool {
        self.best.is_none()
    }

    pub fn top_two(&self) -> TopTwo {
        TopTwo {
            best: self.best,
            second: self.second,
        }
    }

    pub fn routing_key(&self) -> Vec<u8> {
        (self.leaf as u64).to_le_bytes().to_vec()
    }
}

/// Messages the aggregator sends to the local-statistics tier.
#[derive(Clone, Debug, PartialEq)]
pub enum AggregatorOutput {
    Attribute(AttributeEvent),
    Compute(ComputeEvent),
    Drop(DropLeafEvent),
}

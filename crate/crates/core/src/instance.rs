//! Class labels and the sparse feature vectors that flow into learners.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentiment class. Variant order is alphabetical by name, so `Ord` gives
/// the lexicographic tie-break used throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Neutral,
    Positive,
}

pub const NUM_CLASSES: usize = 3;

/// Per-class observation counts indexed by [`Label::index`].
pub type ClassCounts = [u64; NUM_CLASSES];

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::Negative, Label::Neutral, Label::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Label {
        Label::ALL[i]
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Negative => "negative",
            Label::Neutral => "neutral",
            Label::Positive => "positive",
        }
    }

    /// Lexicographically first class, used when nothing else decides.
    pub fn default_class() -> Label {
        Label::Negative
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label `{0}`")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" | "+" => Ok(Label::Positive),
            "negative" | "neg" | "-" => Ok(Label::Negative),
            "neutral" | "neu" => Ok(Label::Neutral),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

/// Class with the largest count; ties go to the lexicographically first
/// class. `None` when every count is zero.
pub fn majority(counts: &ClassCounts) -> Option<Label> {
    let mut best: Option<(usize, u64)> = None;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| Label::from_index(i))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("attribute ids must be strictly increasing (at position {0})")]
    Unsorted(usize),
    #[error("weight of attribute {0} is negative or not finite")]
    BadWeight(u32),
}

/// Attribute-id → weight vector with an optional class label.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseInstance {
    features: Vec<(u32, f64)>,
    pub label: Option<Label>,
}

impl SparseInstance {
    pub fn new(features: Vec<(u32, f64)>, label: Option<Label>) -> Result<Self, InstanceError> {
        for (i, w) in features.windows(2).enumerate() {
            if w[0].0 >= w[1].0 {
                return Err(InstanceError::Unsorted(i + 1));
            }
        }
        if let Some(&(a, _)) = features.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(InstanceError::BadWeight(a));
        }
        Ok(Self { features, label })
    }

    /// Builds an instance where each listed attribute has weight 1.
    pub fn presence(mut attributes: Vec<u32>, label: Option<Label>) -> Self {
        attributes.sort_unstable();
        attributes.dedup();
        Self {
            features: attributes.into_iter().map(|a| (a, 1.0)).collect(),
            label,
        }
    }

    pub fn features(&self) -> &[(u32, f64)] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn weight(&self, attribute: u32) -> f64 {
        self.features
            .binary_search_by_key(&attribute, |&(a, _)| a)
            .map(|i| self.features[i].1)
            .unwrap_or(0.0)
    }

    /// Presence for tree splits means a strictly positive weight.
    pub fn is_present(&self, attribute: u32) -> bool {
        self.weight(attribute) > 0.0
    }

    pub fn retain(&mut self, mut keep: impl FnMut(u32) -> bool) {
        self.features.retain(|&(a, _)| keep(a));
    }

    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }
}

//! Multinomial Naive Bayes over tf-idf weights with Laplace smoothing.

use std::collections::HashMap;

use crate::instance::{ClassCounts, Label, SparseInstance, NUM_CLASSES};

use super::{LearnerError, ModelSummary, OnlineLearner};

#[derive(Clone, Debug, PartialEq)]
pub struct NaiveBayes {
    alpha: f64,
    docs: ClassCounts,
    total_mass: [f64; NUM_CLASSES],
    /// attribute -> per-class feature mass
    mass: HashMap<u32, [f64; NUM_CLASSES]>,
}

impl Default for NaiveBayes {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl NaiveBayes {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha > 0.0, "smoothing must be positive");
        Self {
            alpha,
            docs: [0; NUM_CLASSES],
            total_mass: [0.0; NUM_CLASSES],
            mass: HashMap::new(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn documents(&self) -> &ClassCounts {
        &self.docs
    }

    pub fn vocabulary_size(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self, label: Label, attribute: u32) -> f64 {
        self.mass.get(&attribute).map_or(0.0, |m| m[label.index()])
    }

    pub fn total_mass(&self, label: Label) -> f64 {
        self.total_mass[label.index()]
    }

    pub fn train(&mut self, x: &SparseInstance) -> Result<(), LearnerError> {
        let c = x.label.ok_or(LearnerError::Unlabeled)?.index();
        self.docs[c] += 1;
        for &(a, w) in x.features() {
            self.mass.entry(a).or_default()[c] += w;
            self.total_mass[c] += w;
        }
        Ok(())
    }

    /// Per-class log scores; classes never trained on score `-inf`.
    pub fn scores(&self, x: &SparseInstance) -> Result<[f64; NUM_CLASSES], LearnerError> {
        let n: u64 = self.docs.iter().sum();
        if n == 0 {
            return Err(LearnerError::Untrained);
        }
        let v = self.mass.len() as f64;
        let mut out = [f64::NEG_INFINITY; NUM_CLASSES];
        for (c, score) in out.iter_mut().enumerate() {
            if self.docs[c] == 0 {
                continue;
            }
            let denom = (self.total_mass[c] + self.alpha * v).ln();
            let mut s = (self.docs[c] as f64 / n as f64).ln();
            for &(a, w) in x.features() {
                let m = self.mass.get(&a).map_or(0.0, |m| m[c]);
                s += w * ((m + self.alpha).ln() - denom);
            }
            *score = s;
        }
        Ok(out)
    }

    /// Argmax of the scores, ties to the first class; `None` when untrained.
    pub fn try_predict(&self, x: &SparseInstance) -> Option<Label> {
        let scores = self.scores(x).ok()?;
        let mut best = 0;
        for c in 1..NUM_CLASSES {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        Some(Label::from_index(best))
    }

    pub fn state_bytes(&self) -> usize {
        std::mem::size_of::<Self>() + self.mass.len() * std::mem::size_of::<(u32, [f64; NUM_CLASSES])>()
    }
}

impl OnlineLearner for NaiveBayes {
    fn name(&self) -> &'static str {
        "nb"
    }

    fn predict(&self, x: &SparseInstance) -> Label {
        self.try_predict(x).unwrap_or_else(Label::default_class)
    }

    fn train(&mut self, x: &SparseInstance) -> Result<(), LearnerError> {
        NaiveBayes::train(self, x)
    }

    fn summary(&self) -> ModelSummary {
        ModelSummary::for_tree("nb", 0, 0, 0, &self.docs)
    }

    fn state_bytes(&self) -> usize {
        NaiveBayes::state_bytes(self)
    }
}

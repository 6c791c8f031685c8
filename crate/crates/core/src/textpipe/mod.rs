//! Text pipeline: admission, normalisation, emoticon labelling, tf-idf
//! vectorisation and sketch-based feature selection.

pub mod filter;
pub mod select;
pub mod tfidf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Label, SparseInstance};
use crate::sketch::SpaceSaving;

pub use filter::{
    label_by_emoticons, language_admit, reduce_features, tokenize, AdmitAll, HeuristicFilter, LanguageFilter,
};
pub use select::select_features;
pub use tfidf::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("document has no tokens")]
    EmptyDocument,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub lang: Option<String>,
    /// Epoch milliseconds.
    pub timestamp: Option<i64>,
    /// Gold label supplied with the input, if any.
    pub label: Option<Label>,
}

/// A document after the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Processed {
    pub id: String,
    pub instance: SparseInstance,
    pub emoticon_label: Option<Label>,
    pub gold_label: Option<Label>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PipelineConfig {
    pub sketch_capacity: usize,
    pub top_k: usize,
    pub vocabulary_cap: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sketch_capacity: 2000,
            top_k: 1000,
            vocabulary_cap: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PipelineCounters {
    pub seen: u64,
    pub rejected_language: u64,
    pub empty: u64,
    pub emitted: u64,
}

pub struct TextPipeline {
    filter: Box<dyn LanguageFilter>,
    vocabulary: Vocabulary,
    sketch: SpaceSaving<u32>,
    top_k: usize,
    counters: PipelineCounters,
}

impl TextPipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Self::with_filter(config, Box::new(HeuristicFilter::default()))
    }

    pub fn with_filter(config: PipelineConfig, filter: Box<dyn LanguageFilter>) -> Self {
        Self {
            filter,
            vocabulary: config.vocabulary_cap.map_or_else(Vocabulary::new, Vocabulary::with_cap),
            sketch: SpaceSaving::new(config.sketch_capacity),
            top_k: config.top_k,
            counters: PipelineCounters::default(),
        }
    }

    /// Runs one document through every stage. `None` when the document is
    /// not admitted or has no tokens left.
    pub fn process(&mut self, doc: &Document) -> Option<Processed> {
        self.counters.seen += 1;
        if !self.filter.admit(doc) {
            self.counters.rejected_language += 1;
            return None;
        }
        let reduced = reduce_features(&doc.text);
        let (emoticon_label, stripped) = label_by_emoticons(&reduced);
        let tokens = tokenize(&stripped);
        let Ok(x) = self.vocabulary.vectorize(&tokens) else {
            self.counters.empty += 1;
            return None;
        };
        let instance = select_features(x, &mut self.sketch, self.top_k);
        self.counters.emitted += 1;
        Some(Processed {
            id: doc.id.clone(),
            instance,
            emoticon_label,
            gold_label: doc.label,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn sketch(&self) -> &SpaceSaving<u32> {
        &self.sketch
    }

    pub fn counters(&self) -> PipelineCounters {
        self.counters
    }

    /// Top `j` tokens by sketch count as `(token, count, error)`.
    pub fn top_tokens(&self, j: usize) -> Vec<(String, u64, u64)> {
        self.sketch
            .top(j)
            .into_iter()
            .map(|e| {
                let token = self.vocabulary.token(e.item).unwrap_or("?").to_string();
                (token, e.count, e.error)
            })
            .collect()
    }

    pub fn state_bytes(&self) -> usize {
        self.vocabulary.state_bytes() + self.sketch.state_bytes()
    }
}

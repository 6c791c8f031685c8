//! Incremental tf-idf vocabulary.

use std::collections::HashMap;

use crate::instance::SparseInstance;

use super::TextError;

/// Append-only token table with per-token document frequency.
#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
    doc_freq: Vec<u64>,
    documents: u64,
    cap: Option<usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Vocabulary that stops admitting new tokens after `cap` entries;
    /// unknown tokens still count towards document length.
    pub fn with_cap(cap: usize) -> Self {
        Self {
            cap: Some(cap),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn documents(&self) -> u64 {
        self.documents
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn doc_freq(&self, id: u32) -> u64 {
        self.doc_freq[id as usize]
    }

    pub fn idf(&self, id: u32) -> f64 {
        (self.documents as f64 / self.doc_freq[id as usize] as f64).ln()
    }

    /// Updates document statistics with `tokens` and returns its weights.
    pub fn vectorize(&mut self, tokens: &[String]) -> Result<SparseInstance, TextError> {
        if tokens.is_empty() {
            return Err(TextError::EmptyDocument);
        }
        let mut freq: HashMap<u32, u64> = HashMap::new();
        for t in tokens {
            if let Some(id) = self.intern(t) {
                *freq.entry(id).or_default() += 1;
            }
        }
        self.documents += 1;
        for &id in freq.keys() {
            self.doc_freq[id as usize] += 1;
        }
        let len = tokens.len() as f64;
        let mut features: Vec<(u32, f64)> = freq
            .into_iter()
            .map(|(id, f)| (id, f as f64 / len * self.idf(id)))
            .collect();
        features.sort_unstable_by_key(|&(id, _)| id);
        Ok(SparseInstance::new(features, None).expect("ids are unique and weights finite"))
    }

    fn intern(&mut self, token: &str) -> Option<u32> {
        if let Some(&id) = self.ids.get(token) {
            return Some(id);
        }
        if self.cap.is_some_and(|c| self.tokens.len() >= c) {
            return None;
        }
        let id = self.tokens.len() as u32;
        self.ids.insert(token.to_string(), id);
        self.tokens.push(token.to_string());
        self.doc_freq.push(0);
        Some(id)
    }

    /// `id<TAB>token` lines in id order.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            out.push_str(&format!("{i}\t{t}\n"));
        }
        out
    }

    pub fn state_bytes(&self) -> usize {
        let strings: usize = self.tokens.iter().map(|t| 2 * t.len()).sum();
        strings + self.tokens.len() * (2 * std::mem::size_of::<String>() + 4 + 8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn first_document_is_zero_vector() {
        let mut v = Vocabulary::new();
        let x = v.vectorize(&toks("a b b c")).unwrap();
        assert_eq!(x.len(), 3);
        assert!(x.features().iter().all(|&(_, w)| w == 0.0));
    }

    #[test]
    fn rare_token_idf() {
        let mut v = Vocabulary::new();
        for d in ["x y", "x z", "x w", "x rare"] {
            v.vectorize(&toks(d)).unwrap();
        }
        let id = v.id("rare").unwrap();
        assert!((v.idf(id) - 4f64.ln()).abs() < 1e-12);
        assert!((v.idf(id) - 1.3863).abs() < 1e-4);
        assert_eq!(v.idf(v.id("x").unwrap()), 0.0);
    }

    #[test]
    fn term_frequencies_sum_to_one() {
        let mut v = Vocabulary::new();
        v.vectorize(&toks("filler")).unwrap();
        let x = v.vectorize(&toks("p q q r r r")).unwrap();
        // every token is new to this document: idf = ln 2 for all
        let total: f64 = x.features().iter().map(|&(_, w)| w).sum();
        assert!((total / 2f64.ln() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_document_rejected() {
        assert_eq!(Vocabulary::new().vectorize(&[]), Err(TextError::EmptyDocument));
    }

    #[test]
    fn ids_are_stable_and_exportable() {
        let mut v = Vocabulary::new();
        v.vectorize(&toks("b a")).unwrap();
        v.vectorize(&toks("c a")).unwrap();
        assert_eq!(v.export(), "0\tb\n1\ta\n2\tc\n");
        assert_eq!(v.doc_freq(1), 2);
    }

    #[test]
    fn cap_stops_growth() {
        let mut v = Vocabulary::with_cap(2);
        let x = v.vectorize(&toks("a b c d")).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(x.len(), 2);
    }
}

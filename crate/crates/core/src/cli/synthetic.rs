//! Seeded generator of labelled tweet-like documents.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use thiserror::Error;

use crate::instance::Label;
use crate::textpipe::Document;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid synthetic spec: {0}")]
pub struct SpecError(pub String);

/// Parameters of the generator, written as `key=value` pairs separated by
/// commas, e.g. `instances=50000,vocab=3000,strength=0.6,drift=25000`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub instances: u64,
    pub vocabulary: usize,
    pub zipf: f64,
    /// Probability that a token is drawn from the class's own pool.
    pub strength: f64,
    /// Fraction of the vocabulary carrying a class preference.
    pub polar_fraction: f64,
    pub length: usize,
    pub positive_rate: f64,
    /// Instance index from which the class pools are swapped.
    pub drift_at: Option<u64>,
    /// Probability of appending a class emoticon.
    pub emoticon_rate: f64,
    /// Probability that an appended emoticon has the wrong polarity.
    pub emoticon_noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            instances: 100_000,
            vocabulary: 5000,
            zipf: 1.1,
            strength: 0.3,
            polar_fraction: 0.2,
            length: 12,
            positive_rate: 0.5,
            drift_at: None,
            emoticon_rate: 0.0,
            emoticon_noise: 0.0,
        }
    }
}

impl FromStr for SyntheticSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        let mut spec = SyntheticSpec::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| SpecError(format!("`{part}` is not key=value")))?;
            let bad = || SpecError(format!("bad value for {k}: `{v}`"));
            let f = || v.parse::<f64>().map_err(|_| bad());
            let n = || v.parse::<u64>().map_err(|_| bad());
            match k.trim() {
                "instances" | "n" => spec.instances = n()?,
                "vocab" | "vocabulary" => spec.vocabulary = n()? as usize,
                "zipf" => spec.zipf = f()?,
                "strength" => spec.strength = f()?,
                "polar" => spec.polar_fraction = f()?,
                "length" => spec.length = n()? as usize,
                "positive" => spec.positive_rate = f()?,
                "drift" => spec.drift_at = if v == "none" { None } else { Some(n()?) },
                "emoticons" => spec.emoticon_rate = f()?,
                "noise" => spec.emoticon_noise = f()?,
                other => return Err(SpecError(format!("unknown key `{other}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(SpecError(format!("{name} must lie in [0, 1]")))
            }
        };
        unit("strength", self.strength)?;
        unit("polar", self.polar_fraction)?;
        unit("positive", self.positive_rate)?;
        unit("emoticons", self.emoticon_rate)?;
        unit("noise", self.emoticon_noise)?;
        if self.vocabulary < 10 {
            return Err(SpecError("vocab must be at least 10".into()));
        }
        if !(self.zipf > 0.0 && self.zipf.is_finite()) {
            return Err(SpecError("zipf exponent must be positive".into()));
        }
        if self.length == 0 {
            return Err(SpecError("length must be positive".into()));
        }
        Ok(())
    }

    pub fn generate(&self, seed: u64) -> SyntheticStream {
        SyntheticStream::new(self.clone(), seed)
    }
}

/// Pronounceable word for a vocabulary index.
fn word(mut i: usize) -> String {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let mut w = String::new();
    loop {
        w.push(C[i % C.len()] as char);
        i /= C.len();
        w.push(V[i % V.len()] as char);
        i /= V.len();
        if i == 0 {
            break;
        }
        i -= 1;
    }
    w
}

pub struct SyntheticStream {
    spec: SyntheticSpec,
    rng: ChaCha8Rng,
    words: Vec<String>,
    /// Vocabulary indices preferred by negative and positive documents.
    pools: [Vec<usize>; 2],
    global: Zipf<f64>,
    pool_zipf: [Zipf<f64>; 2],
    produced: u64,
}

impl SyntheticStream {
    fn new(spec: SyntheticSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words: Vec<String> = (0..spec.vocabulary).map(word).collect();
        let mut order: Vec<usize> = (0..spec.vocabulary).collect();
        order.shuffle(&mut rng);
        let polar = ((spec.vocabulary as f64 * spec.polar_fraction) as usize).max(2);
        let (neg, pos): (Vec<usize>, Vec<usize>) = {
            let chosen = &order[..polar.min(order.len())];
            let mid = chosen.len() / 2;
            (chosen[..mid].to_vec(), chosen[mid..].to_vec())
        };
        let zipf = |n: usize| Zipf::new(n as f64, spec.zipf).expect("validated exponent");
        Self {
            global: zipf(spec.vocabulary),
            pool_zipf: [zipf(neg.len()), zipf(pos.len())],
            pools: [neg, pos],
            words,
            rng,
            spec,
            produced: 0,
        }
    }

    fn draw(&mut self, dist: Zipf<f64>) -> usize {
        dist.sample(&mut self.rng) as usize - 1
    }
}

impl Iterator for SyntheticStream {
    type Item = Document;

    fn next(&mut self) -> Option<Document> {
        if self.produced >= self.spec.instances {
            return None;
        }
        let i = self.produced;
        self.produced += 1;
        let positive = self.rng.random_bool(self.spec.positive_rate);
        let drifted = self.spec.drift_at.is_some_and(|d| i >= d);
        let pool = usize::from(positive != drifted);
        let mut text = String::new();
        for t in 0..self.spec.length {
            let idx = if self.rng.random_bool(self.spec.strength) {
                let r = self.draw(self.pool_zipf[pool]);
                self.pools[pool][r]
            } else {
                self.draw(self.global)
            };
            if t > 0 {
                text.push(' ');
            }
            text.push_str(&self.words[idx]);
        }
        if self.rng.random_bool(self.spec.emoticon_rate) {
            let flip = self.rng.random_bool(self.spec.emoticon_noise);
            text.push_str(if positive != flip { " :)" } else { " :(" });
        }
        Some(Document {
            id: format!("syn-{i}"),
            text,
            lang: Some("en".to_string()),
            timestamp: Some(i as i64),
            label: Some(if positive { Label::Positive } else { Label::Negative }),
        })
    }
}

/// JSON-lines form of a document, as read back by the ingester.
pub fn to_json_line(doc: &Document) -> String {
    let mut record = serde_json::Map::new();
    record.insert("id".into(), doc.id.clone().into());
    record.insert("text".into(), doc.text.clone().into());
    if let Some(l) = &doc.lang {
        record.insert("lang".into(), l.clone().into());
    }
    if let Some(t) = doc.timestamp {
        record.insert("created_at".into(), t.into());
    }
    if let Some(l) = doc.label {
        record.insert("label".into(), l.name().into());
    }
    let mut s = serde_json::Value::Object(record).to_string();
    let _ = writeln!(s);
    s
}

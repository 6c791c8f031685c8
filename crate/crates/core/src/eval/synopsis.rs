//! Immutable snapshot of evaluator, sketch and model state, serialised as
//! a flat `key=value` block.

use std::fmt::Write as _;

use thiserror::Error;

use crate::instance::{Label, NUM_CLASSES};
use crate::learners::ModelSummary;

use super::window::{Metrics, SlidingWindowEvaluator};

#[derive(Clone, Debug, PartialEq)]
pub struct TokenCount {
    pub token: String,
    pub count: u64,
    pub error: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synopsis {
    pub timestamp_ms: u64,
    pub metrics: Metrics,
    pub actual: [u64; NUM_CLASSES],
    pub predicted: [u64; NUM_CLASSES],
    pub top_tokens: Vec<TokenCount>,
    pub model: Option<ModelSummary>,
    pub drift_detections: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynopsisError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("missing key `{0}`")]
    Missing(String),
}

pub fn snapshot(
    ev: &SlidingWindowEvaluator,
    top_tokens: Vec<TokenCount>,
    model: Option<ModelSummary>,
    timestamp_ms: u64,
) -> Synopsis {
    Synopsis {
        timestamp_ms,
        metrics: ev.metrics(),
        actual: ev.actual_distribution(),
        predicted: ev.predicted_distribution(),
        top_tokens,
        model,
        drift_detections: ev.drifts().len() as u64,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x}"))
}

fn parse_opt(v: &str) -> Result<Option<f64>, String> {
    if v == "undefined" {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|_| format!("not a number: `{v}`"))
}

impl Synopsis {
    /// Equality ignoring the timestamp.
    pub fn same_content(&self, other: &Synopsis) -> bool {
        Synopsis {
            timestamp_ms: 0,
            ..self.clone()
        } == Synopsis {
            timestamp_ms: 0,
            ..other.clone()
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = &self.metrics;
        let _ = writeln!(s, "timestamp_ms={}", self.timestamp_ms);
        let _ = writeln!(s, "instances_seen={}", m.instances_seen);
        let _ = writeln!(s, "window_instances={}", m.instances_in_window);
        let _ = writeln!(s, "accuracy={}", opt(m.accuracy));
        let _ = writeln!(s, "kappa={}", opt(m.kappa));
        let _ = writeln!(s, "throughput_ips={}", opt(m.throughput));
        let _ = writeln!(s, "drift_detections={}", self.drift_detections);
        for l in Label::ALL {
            let _ = writeln!(s, "actual.{l}={}", self.actual[l.index()]);
        }
        for l in Label::ALL {
            let _ = writeln!(s, "predicted.{l}={}", self.predicted[l.index()]);
        }
        let _ = writeln!(s, "topk.size={}", self.top_tokens.len());
        for (i, t) in self.top_tokens.iter().enumerate() {
            let _ = writeln!(s, "topk.{i}={},{},{}", t.token, t.count, t.error);
        }
        if let Some(model) = &self.model {
            let _ = writeln!(s, "model.learner={}", model.learner);
            let _ = writeln!(s, "model.node_count={}", model.node_count);
            let _ = writeln!(s, "model.depth={}", model.depth);
            let _ = writeln!(s, "model.leaf_count={}", model.leaf_count);
            let _ = writeln!(s, "model.trained={}", model.trained);
            for l in Label::ALL {
                let _ = writeln!(s, "model.prior.{l}={}", model.class_priors[l.index()]);
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Synopsis, SynopsisError> {
        let mut kv: Vec<(usize, &str, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let (k, v) = raw.split_once('=').ok_or_else(|| SynopsisError::Malformed {
                line,
                reason: "expected key=value".into(),
            })?;
            kv.push((line, k, v));
        }
        let find = |key: &str| kv.iter().find(|(_, k, _)| *k == key).map(|&(l, _, v)| (l, v));
        let get = |key: &str| find(key).ok_or_else(|| SynopsisError::Missing(key.to_string()));
        fn num<T: std::str::FromStr>((line, v): (usize, &str)) -> Result<T, SynopsisError> {
            v.parse().map_err(|_| SynopsisError::Malformed {
                line,
                reason: format!("not a number: `{v}`"),
            })
        }
        let optnum = |(line, v): (usize, &str)| parse_opt(v).map_err(|reason| SynopsisError::Malformed { line, reason });

        let metrics = Metrics {
            instances_seen: num(get("instances_seen")?)?,
            instances_in_window: num(get("window_instances")?)?,
            accuracy: optnum(get("accuracy")?)?,
            kappa: optnum(get("kappa")?)?,
            throughput: optnum(get("throughput_ips")?)?,
        };
        let mut actual = [0; NUM_CLASSES];
        let mut predicted = [0; NUM_CLASSES];
        for l in Label::ALL {
            actual[l.index()] = num(get(&format!("actual.{l}"))?)?;
            predicted[l.index()] = num(get(&format!("predicted.{l}"))?)?;
        }
        let size: usize = num(get("topk.size")?)?;
        let mut top_tokens = Vec::with_capacity(size);
        for i in 0..size {
            let (line, v) = get(&format!("topk.{i}"))?;
            let bad = || SynopsisError::Malformed {
                line,
                reason: "expected token,count,error".into(),
            };
            let mut parts = v.rsplitn(3, ',');
            let error = parts.next().ok_or_else(bad)?;
            let count = parts.next().ok_or_else(bad)?;
            let token = parts.next().ok_or_else(bad)?;
            top_tokens.push(TokenCount {
                token: token.to_string(),
                count: num((line, count))?,
                error: num((line, error))?,
            });
        }
        let model = match find("model.learner") {
            None => None,
            Some((_, learner)) => {
                let mut class_priors = [0.0; NUM_CLASSES];
                for l in Label::ALL {
                    class_priors[l.index()] = num(get(&format!("model.prior.{l}"))?)?;
                }
                Some(ModelSummary {
                    learner: learner.to_string(),
                    node_count: num(get("model.node_count")?)?,
                    depth: num(get("model.depth")?)?,
                    leaf_count: num(get("model.leaf_count")?)?,
                    class_priors,
                    trained: num(get("model.trained")?)?,
                })
            }
        };
        Ok(Synopsis {
            timestamp_ms: num(get("timestamp_ms")?)?,
            metrics,
            actual,
            predicted,
            top_tokens,
            model,
            drift_detections: num(get("drift_detections")?)?,
        })
    }

    /// Human-readable answer to a synopsis query.
    pub fn render(&self) -> String {
        let pct = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{:.2}%", 100.0 * x));
        let m = &self.metrics;
        let mut s = String::new();
        let _ = writeln!(s, "instances seen     {}", m.instances_seen);
        let _ = writeln!(s, "window instances   {}", m.instances_in_window);
        let _ = writeln!(s, "accuracy           {}", pct(m.accuracy));
        let _ = writeln!(s, "kappa              {}", pct(m.kappa));
        let _ = writeln!(s, "drift detections   {}", self.drift_detections);
        let _ = writeln!(s, "class distribution (actual / predicted)");
        for l in Label::ALL {
            let _ = writeln!(s, "  {:<10} {} / {}", l.name(), self.actual[l.index()], self.predicted[l.index()]);
        }
        let _ = writeln!(s, "top tokens (count, max overestimate)");
        for t in &self.top_tokens {
            let _ = writeln!(s, "  {:<20} {} ({})", t.token, t.count, t.error);
        }
        if let Some(model) = &self.model {
            let _ = writeln!(
                s,
                "model {}: {} nodes, depth {}, {} leaves, {} trained",
                model.learner, model.node_count, model.depth, model.leaf_count, model.trained
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Synopsis {
        let mut ev = SlidingWindowEvaluator::new(10);
        ev.record(Label::Positive, Label::Positive);
        ev.record(Label::Negative, Label::Positive);
        snapshot(
            &ev,
            vec![TokenCount {
                token: "great".into(),
                count: 9,
                error: 1,
            }],
            Some(ModelSummary::for_tree("ht", 3, 1, 2, &[1, 0, 3])),
            42,
        )
    }

    #[test]
    fn round_trip() {
        let s = sample();
        assert_eq!(Synopsis::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn initial_snapshot() {
        let s = snapshot(&SlidingWindowEvaluator::new(10), vec![], None, 0);
        assert_eq!(s.metrics.kappa, None);
        assert!(s.top_tokens.is_empty());
        assert_eq!(Synopsis::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn corrupt_line_is_named() {
        let text = sample().to_text().replace("window_instances=2", "window_instances=two");
        let err = Synopsis::parse(&text).unwrap_err();
        assert!(matches!(err, SynopsisError::Malformed { line: 3, .. }), "{err}");
        let err = Synopsis::parse("timestamp_ms=1\ngarbage\n").unwrap_err();
        assert_eq!(err.to_string(), "line 2: expected key=value");
    }
}

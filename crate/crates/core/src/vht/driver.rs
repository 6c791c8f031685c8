//! In-process vertical tree: the aggregator and every local-statistics
//! shard driven synchronously, with events routed exactly as the engine
//! routes them.

use crate::engine::key_index;
use crate::instance::{Label, SparseInstance};
use crate::learners::{LearnerError, ModelSummary, OnlineLearner, ShapeNode};

use super::aggregator::{ModelAggregator, SplitOutcome, VhtParams};
use super::events::{AggregatorOutput, LocalResultEvent};
use super::local::LocalStatistics;

#[derive(Clone, Debug)]
pub struct VerticalTree {
    aggregator: ModelAggregator,
    shards: Vec<LocalStatistics>,
}

impl VerticalTree {
    pub fn new(params: VhtParams) -> Self {
        let shards = (0..params.parallelism).map(LocalStatistics::new).collect();
        Self {
            aggregator: ModelAggregator::new(params),
            shards,
        }
    }

    pub fn aggregator(&self) -> &ModelAggregator {
        &self.aggregator
    }

    pub fn shards(&self) -> &[LocalStatistics] {
        &self.shards
    }

    pub fn shape(&self) -> Vec<ShapeNode> {
        self.aggregator.shape()
    }

    /// Shard holding `attribute`.
    pub fn shard_of(&self, attribute: u32) -> usize {
        key_index(&attribute.to_le_bytes(), self.shards.len())
    }

    /// Prequential step; returns the prediction made before training.
    pub fn process(&mut self, x: &SparseInstance) -> Result<Label, LearnerError> {
        let (prediction, outputs) = self.aggregator.aggregate_instance(x)?;
        let mut results: Vec<LocalResultEvent> = Vec::new();
        self.deliver(outputs, &mut results);
        let mut i = 0;
        while i < results.len() {
            if let Some(SplitOutcome { outputs, .. }) = self.aggregator.receive_local_result(&results[i]) {
                self.deliver(outputs, &mut results);
            }
            i += 1;
        }
        Ok(prediction)
    }

    fn deliver(&mut self, outputs: Vec<AggregatorOutput>, results: &mut Vec<LocalResultEvent>) {
        for o in outputs {
            match o {
                AggregatorOutput::Attribute(ev) => {
                    let s = self.shard_of(ev.attribute);
                    self.shards[s].local_update(&ev);
                }
                AggregatorOutput::Compute(ev) => {
                    results.extend(self.shards.iter().map(|s| s.local_compute(&ev)));
                }
                AggregatorOutput::Drop(ev) => self.shards.iter_mut().for_each(|s| s.drop_leaf(ev.leaf)),
            }
        }
    }

    pub fn state_bytes(&self) -> usize {
        self.aggregator.state_bytes() + self.shards.iter().map(LocalStatistics::state_bytes).sum::<usize>()
    }
}

impl OnlineLearner for VerticalTree {
    fn name(&self) -> &'static str {
        "vht"
    }

    fn predict(&self, x: &SparseInstance) -> Label {
        self.aggregator.predict(x)
    }

    fn train(&mut self, x: &SparseInstance) -> Result<(), LearnerError> {
        self.process(x).map(|_| ())
    }

    fn summary(&self) -> ModelSummary {
        self.aggregator.summary()
    }

    fn state_bytes(&self) -> usize {
        VerticalTree::state_bytes(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{build_topology, run, Grouping, HandlerRegistry, RunMode, RunOptions, TopologySpec};
    use crate::flow::{add_learner, CollectorBolt, InstanceEvent, LearnerConfig, LearnerKind, Payload, QueueSpout};
    use crate::learners::{HoeffdingTree, TreeParams};
    use crate::vht::events::ComputeEvent;
    use crate::vht::LocalResultEvent;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::{Arc, Mutex};

    /// Class depends on attributes 3, 11 and 20; 40 noise attributes.
    fn stream(n: usize, seed: u64) -> Vec<SparseInstance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut features: Vec<(u32, f64)> = Vec::new();
                for a in 0..40u32 {
                    if rng.random_bool(0.25) {
                        let w = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.1..1.0) };
                        features.push((a, w));
                    }
                }
                let x = SparseInstance::new(features, None).unwrap();
                let signal = x.is_present(3) as u8 + x.is_present(11) as u8 + (!x.is_present(20)) as u8;
                let positive = if rng.random_bool(0.1) { signal < 2 } else { signal >= 2 };
                x.with_label(Some(if positive { Label::Positive } else { Label::Negative }))
            })
            .collect()
    }

    fn params(p: usize) -> VhtParams {
        VhtParams::new(TreeParams::default(), p)
    }

    #[test]
    fn matches_sequential_tree_for_any_parallelism() {
        let data = stream(6000, 1);
        let mut ht = HoeffdingTree::new(TreeParams::default());
        let expected: Vec<Label> = data
            .iter()
            .map(|x| {
                let p = ht.predict(x);
                ht.train(x).unwrap();
                p
            })
            .collect();
        assert!(ht.tree().node_count() >= 5, "stream should grow a real tree");
        for p in [1, 2, 3, 4, 7] {
            let mut vht = VerticalTree::new(params(p));
            let got: Vec<Label> = data.iter().map(|x| vht.process(x).unwrap()).collect();
            assert_eq!(vht.shape(), ht.shape(), "p={p}");
            assert_eq!(got, expected, "p={p}");
        }
    }

    #[test]
    fn shards_conserve_sequential_statistics() {
        let data = stream(3000, 2);
        let mut ht = HoeffdingTree::new(TreeParams::default());
        let mut vht = VerticalTree::new(params(4));
        for x in &data {
            ht.train(x).unwrap();
            vht.process(x).unwrap();
        }
        for (leaf, stats) in ht.tree().leaves() {
            for (&a, counts) in &stats.present {
                let shard = vht.shard_of(a);
                assert_eq!(vht.shards()[shard].present_counts(leaf, a), Some(counts));
                for (i, s) in vht.shards().iter().enumerate() {
                    if i != shard {
                        assert_eq!(s.present_counts(leaf, a), None);
                    }
                }
            }
            let held: usize = vht.shards().iter().map(|s| s.attributes(leaf).count()).sum();
            assert_eq!(held, stats.present.len());
        }
    }

    #[test]
    fn key_grouping_is_fixed() {
        let vht = VerticalTree::new(params(4));
        assert_eq!(vht.shard_of(7), key_index(&7u32.to_le_bytes(), 4));
    }

    #[test]
    fn untrained_prediction_and_event_count() {
        let mut agg = ModelAggregator::new(params(2));
        let x = SparseInstance::presence(vec![1, 5, 9], Some(Label::Positive));
        let (pred, out) = agg.aggregate_instance(&x).unwrap();
        assert_eq!(pred, Label::default_class());
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|o| matches!(o, AggregatorOutput::Attribute(_))));
        assert!(agg.aggregate_instance(&SparseInstance::presence(vec![1], None)).is_err());
    }

    fn due_aggregator(p: usize, timeout: Option<u64>) -> (ModelAggregator, ComputeEvent) {
        let mut agg = ModelAggregator::new(VhtParams {
            timeout_events: timeout,
            ..params(p)
        });
        let mut compute = None;
        for i in 0..200 {
            let label = if i % 2 == 0 { Label::Positive } else { Label::Negative };
            let (_, out) = agg.aggregate_instance(&SparseInstance::presence(vec![i % 2], Some(label))).unwrap();
            for o in out {
                if let AggregatorOutput::Compute(c) = o {
                    assert!(compute.is_none(), "exactly one compute request");
                    compute = Some(c);
                }
            }
        }
        (agg, compute.expect("leaf is due at the grace period"))
    }

    fn result(c: &ComputeEvent, responder: usize, best: Option<(u32, f64)>) -> LocalResultEvent {
        LocalResultEvent {
            leaf: c.leaf,
            attempt: c.attempt,
            best: best.map(|(attribute, gain)| crate::learners::SplitCandidate { attribute, gain }),
            second: None,
            responder,
        }
    }

    #[test]
    fn compute_is_issued_once_at_grace_period() {
        let (agg, c) = due_aggregator(2, None);
        assert_eq!(c.attempt, 1);
        assert_eq!(c.class_counts, [100, 0, 100]);
        assert!(agg.is_splitting(0));
    }

    #[test]
    fn all_responders_then_split() {
        let (mut agg, c) = due_aggregator(2, None);
        assert!(agg.receive_local_result(&result(&c, 0, Some((0, 1.0)))).is_none());
        let outcome = agg.receive_local_result(&result(&c, 1, Some((1, 0.1)))).unwrap();
        assert_eq!(outcome.split, Some((0, 1, 2)));
        assert!(matches!(outcome.outputs[0], AggregatorOutput::Drop(_)));
        assert!(!agg.is_splitting(0));
    }

    #[test]
    fn stale_attempts_are_ignored() {
        let (mut agg, c) = due_aggregator(1, None);
        let before = agg.shape();
        let stale = LocalResultEvent {
            attempt: c.attempt + 5,
            ..result(&c, 0, Some((0, 1.0)))
        };
        assert!(agg.receive_local_result(&stale).is_none());
        assert_eq!(agg.shape(), before);
        assert!(agg.is_splitting(0));
        assert_eq!(agg.counters().stale_results, 1);
    }

    #[test]
    fn timeout_without_responders_resumes() {
        let (mut agg, _c) = due_aggregator(3, Some(10));
        let mut closed = Vec::new();
        for _ in 0..20 {
            closed.extend(agg.tick());
        }
        assert_eq!(closed.len(), 1);
        assert_eq!(closed[0].split, None);
        assert!(!agg.is_splitting(0));
        assert_eq!(agg.counters().timeouts, 1);
    }

    #[test]
    fn straggler_timeout_matches_full_response() {
        let (mut full, c) = due_aggregator(3, None);
        full.receive_local_result(&result(&c, 0, Some((0, 1.0))));
        full.receive_local_result(&result(&c, 1, None));
        let a = full.receive_local_result(&result(&c, 2, Some((5, 0.01)))).unwrap();

        let (mut slow, c) = due_aggregator(3, Some(10));
        slow.receive_local_result(&result(&c, 0, Some((0, 1.0))));
        slow.receive_local_result(&result(&c, 1, None));
        let b = (0..20).flat_map(|_| slow.tick()).next().unwrap();
        assert_eq!(a.split, b.split);
        assert_eq!(full.shape(), slow.shape());
        // the late answer is now stale
        assert!(slow.receive_local_result(&result(&c, 2, Some((5, 0.01)))).is_none());
    }

    #[test]
    fn prediction_available_while_attempt_pending() {
        let (agg, _) = due_aggregator(2, None);
        assert!(agg.is_splitting(0));
        let _ = agg.predict(&SparseInstance::presence(vec![0], None));
    }

    fn engine_predictions(data: &[SparseInstance], p: usize, mode: RunMode) -> (Vec<Label>, Vec<ShapeNode>) {
        let events: Vec<InstanceEvent> = data
            .iter()
            .enumerate()
            .map(|(i, x)| InstanceEvent {
                seq: i as u64,
                instance: x.clone(),
                actual: x.label,
            })
            .collect();
        let collected = Arc::new(Mutex::new(Vec::new()));
        let sink = Arc::new(Mutex::new(None));
        let spec = TopologySpec::new()
            .spout("source", 1, "source")
            .bolt("collector", 1, "collector");
        let c2 = collected.clone();
        let events = Mutex::new(Some(events));
        let registry = HandlerRegistry::new()
            .spout("source", move |_| {
                let items = events.lock().unwrap().take().unwrap_or_default();
                Box::new(QueueSpout::new(items, crate::flow::STREAM_INSTANCES, Payload::Instance))
            })
            .bolt("collector", move |_| Box::new(CollectorBolt::new(c2.clone())));
        let mut cfg = LearnerConfig::new(LearnerKind::Vertical);
        cfg.parallelism = p;
        let (spec, registry) = add_learner(spec, registry, "source", "collector", cfg, Some(sink.clone()));
        let topo = build_topology(spec, &registry).unwrap();
        let report = run(
            topo,
            RunOptions {
                mode,
                queue_capacity: crate::engine::QueueCapacity::Unbounded,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(report.events_dropped_at_spout, 0);
        let preds = collected
            .lock()
            .unwrap()
            .iter()
            .filter_map(|p| match p {
                Payload::Prediction(p) => Some(p.predicted),
                _ => None,
            })
            .collect();
        let shape = sink.lock().unwrap().as_ref().unwrap().shape();
        (preds, shape)
    }

    #[test]
    fn engine_run_matches_sequential_tree() {
        let data = stream(3000, 4);
        let mut ht = HoeffdingTree::new(TreeParams::default());
        let expected: Vec<Label> = data
            .iter()
            .map(|x| {
                let p = ht.predict(x);
                ht.train(x).unwrap();
                p
            })
            .collect();
        for p in [1, 2, 4] {
            let (preds, shape) = engine_predictions(&data, p, RunMode::Deterministic);
            assert_eq!(shape, ht.shape(), "p={p}");
            assert_eq!(preds, expected, "p={p}");
        }
    }

    #[test]
    fn concurrent_run_completes() {
        let data = stream(2000, 5);
        let (preds, shape) = engine_predictions(&data, 3, RunMode::Concurrent);
        assert_eq!(preds.len(), data.len());
        assert!(!shape.is_empty());
    }

    #[test]
    fn topology_uses_expected_streams() {
        let spec = TopologySpec::new().spout("s", 1, "s").bolt("sink", 1, "sink");
        let mut cfg = LearnerConfig::new(LearnerKind::Vertical);
        cfg.parallelism = 4;
        let (spec, _) = add_learner(spec, HandlerRegistry::new(), "s", "sink", cfg, None);
        let dump = spec.dump();
        assert!(dump.contains("vht-aggregator -> vht-local [key:attribute]"), "{dump}");
        assert!(dump.contains("vht-aggregator -> vht-local [all]"), "{dump}");
        assert!(dump.contains("vht-local -> vht-aggregator"), "{dump}");
        let _ = Grouping::All;
    }
}

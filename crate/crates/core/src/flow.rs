//! Payload carried on every stream of the sentiment topology, and the
//! bolts and spouts that connect the pipeline, learners and evaluator.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::engine::{
    Bolt, Delivery, Emitter, Grouping, HandlerRegistry, HandlerResult, Spout, SpoutStatus, TopologySpec,
};
use crate::eval::{snapshot, Metrics, SlidingWindowEvaluator, Synopsis, TokenCount};
use crate::instance::{Label, SparseInstance};
use crate::learners::{HoeffdingTree, ModelSummary, NaiveBayes, OnlineLearner, TreeParams};
use crate::textpipe::{Document, TextPipeline};
use crate::vht::{
    AggregatorBolt, AttributeEvent, ComputeEvent, DropLeafEvent, LocalResultEvent, LocalStatisticsBolt,
    ModelAggregator, VhtParams,
};

pub const STREAM_DOCUMENTS: &str = "documents";
pub const STREAM_INSTANCES: &str = "instances";
pub const STREAM_PREDICTIONS: &str = "predictions";
pub const STREAM_TOP_TOKENS: &str = "top-tokens";
pub const STREAM_MODEL: &str = "model-summary";
pub const STREAM_ATTRIBUTE: &str = "attribute";
pub const STREAM_CONTROL: &str = "control";
pub const STREAM_LOCAL_RESULT: &str = "local-result";

/// A vectorised document. `instance.label` is the training label; `actual`
/// is the label predictions are scored against.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceEvent {
    pub seq: u64,
    pub instance: SparseInstance,
    pub actual: Option<Label>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionEvent {
    pub seq: u64,
    pub learner: &'static str,
    pub predicted: Label,
    pub actual: Option<Label>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Document(Document),
    Instance(InstanceEvent),
    Prediction(PredictionEvent),
    TopTokens(Vec<TokenCount>),
    Model(ModelSummary),
    Attribute(AttributeEvent),
    Compute(ComputeEvent),
    DropLeaf(DropLeafEvent),
    LocalResult(LocalResultEvent),
}

pub(crate) fn unexpected(bolt: &str, p: &Payload) -> Box<dyn std::error::Error + Send + Sync> {
    let kind = format!("{p:?}");
    let kind = kind.split(['(', ' ', '{']).next().unwrap_or("?").to_string();
    format!("{bolt} cannot handle {kind} events").into()
}

/// Which label a document trains on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LabelSource {
    /// Emoticon label only.
    Emoticon,
    /// Gold label only.
    Gold,
    /// Emoticon label, falling back to a gold label.
    #[default]
    EmoticonThenGold,
}

impl LabelSource {
    /// Neutral labels never train.
    pub fn training_label(self, emoticon: Option<Label>, gold: Option<Label>) -> Option<Label> {
        let l = match self {
            LabelSource::Emoticon => emoticon,
            LabelSource::Gold => gold,
            LabelSource::EmoticonThenGold => emoticon.or(gold),
        };
        l.filter(|&l| l != Label::Neutral)
    }
}

/// Emits items from a queue, one per pull.
pub struct QueueSpout<T> {
    items: VecDeque<T>,
    stream: &'static str,
    wrap: fn(T) -> Payload,
}

impl<T: Send> QueueSpout<T> {
    pub fn new(items: impl IntoIterator<Item = T>, stream: &'static str, wrap: fn(T) -> Payload) -> Self {
        Self {
            items: items.into_iter().collect(),
            stream,
            wrap,
        }
    }
}

impl<T: Send> Spout<Payload> for QueueSpout<T> {
    fn next(&mut self, out: &mut Emitter<Payload>) -> HandlerResult<SpoutStatus> {
        match self.items.pop_front() {
            Some(item) => {
                out.emit(self.stream, (self.wrap)(item));
                Ok(if self.items.is_empty() {
                    SpoutStatus::Exhausted
                } else {
                    SpoutStatus::Active
                })
            }
            None => Ok(SpoutStatus::Exhausted),
        }
    }
}

/// Pulls documents lazily from an iterator.
pub struct DocumentSpout {
    docs: Box<dyn Iterator<Item = Document> + Send>,
}

impl DocumentSpout {
    pub fn new(docs: Box<dyn Iterator<Item = Document> + Send>) -> Self {
        Self { docs }
    }
}

impl Spout<Payload> for DocumentSpout {
    fn next(&mut self, out: &mut Emitter<Payload>) -> HandlerResult<SpoutStatus> {
        match self.docs.next() {
            Some(d) => {
                out.emit(STREAM_DOCUMENTS, Payload::Document(d));
                Ok(SpoutStatus::Active)
            }
            None => Ok(SpoutStatus::Exhausted),
        }
    }
}

/// Text pipeline as a bolt. Documents whose id is in the predict-only set
/// are scored but never train.
pub struct PipelineBolt {
    pipeline: TextPipeline,
    labels: LabelSource,
    predict_only_prefix: Option<String>,
    summary_every: Option<u64>,
    summary_size: usize,
    seq: u64,
}

impl PipelineBolt {
    pub fn new(pipeline: TextPipeline, labels: LabelSource) -> Self {
        Self {
            pipeline,
            labels,
            predict_only_prefix: None,
            summary_every: None,
            summary_size: 20,
            seq: 0,
        }
    }

    /// Documents with ids starting with `prefix` are never used for training.
    pub fn predict_only(mut self, prefix: &str) -> Self {
        self.predict_only_prefix = Some(prefix.to_string());
        self
    }

    pub fn with_summaries(mut self, every: Option<u64>, size: usize) -> Self {
        self.summary_every = every;
        self.summary_size = size;
        self
    }

    fn top_tokens(&self) -> Payload {
        Payload::TopTokens(
            self.pipeline
                .top_tokens(self.summary_size)
                .into_iter()
                .map(|(token, count, error)| TokenCount { token, count, error })
                .collect(),
        )
    }
}

impl Bolt<Payload> for PipelineBolt {
    fn process(&mut self, input: Delivery<Payload>, out: &mut Emitter<Payload>) -> HandlerResult {
        let Payload::Document(doc) = input.event.payload else {
            return Err(unexpected("pipeline", &input.event.payload));
        };
        if let Some(p) = self.pipeline.process(&doc) {
            let test_doc = self.predict_only_prefix.as_deref().is_some_and(|pre| doc.id.starts_with(pre));
            let train = if test_doc {
                None
            } else {
                self.labels.training_label(p.emoticon_label, p.gold_label)
            };
            let actual = p.gold_label.or(p.emoticon_label);
            self.seq += 1;
            out.emit(
                STREAM_INSTANCES,
                Payload::Instance(InstanceEvent {
                    seq: self.seq,
                    instance: p.instance.with_label(train),
                    actual,
                }),
            );
        }
        if self.summary_every.is_some_and(|n| self.pipeline.counters().seen.is_multiple_of(n)) {
            out.emit(STREAM_TOP_TOKENS, self.top_tokens());
        }
        Ok(())
    }

    fn finish(&mut self, out: &mut Emitter<Payload>) -> HandlerResult {
        out.emit(STREAM_TOP_TOKENS, self.top_tokens());
        Ok(())
    }
}

/// Prequential wrapper around a sequential learner.
pub struct LearnerBolt {
    learner: Box<dyn OnlineLearner>,
    summary_every: Option<u64>,
    seen: u64,
}

impl LearnerBolt {
    pub fn new(learner: Box<dyn OnlineLearner>) -> Self {
        Self {
            learner,
            summary_every: None,
            seen: 0,
        }
    }

    pub fn with_summaries(mut self, every: Option<u64>) -> Self {
        self.summary_every = every;
        self
    }
}

impl Bolt<Payload> for LearnerBolt {
    fn process(&mut self, input: Delivery<Payload>, out: &mut Emitter<Payload>) -> HandlerResult {
        let Payload::Instance(ev) = input.event.payload else {
            return Err(unexpected(self.learner.name(), &input.event.payload));
        };
        let predicted = self.learner.predict(&ev.instance);
        if ev.instance.label.is_some() {
            self.learner.train(&ev.instance)?;
        }
        out.emit(
            STREAM_PREDICTIONS,
            Payload::Prediction(PredictionEvent {
                seq: ev.seq,
                learner: self.learner.name(),
                predicted,
                actual: ev.actual,
            }),
        );
        self.seen += 1;
        if self.summary_every.is_some_and(|n| self.seen.is_multiple_of(n)) {
            out.emit(STREAM_MODEL, Payload::Model(self.learner.summary()));
        }
        Ok(())
    }

    fn finish(&mut self, out: &mut Emitter<Payload>) -> HandlerResult {
        out.emit(STREAM_MODEL, Payload::Model(self.learner.summary()));
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub window_index: u64,
    pub instances: u64,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub instances: u64,
    pub kappa: Option<f64>,
}

/// Everything the evaluator produced over a run.
#[derive(Clone, Debug)]
pub struct EvaluationOutcome {
    pub rows: Vec<MetricsRow>,
    pub curve: Vec<CurvePoint>,
    pub synopsis: Synopsis,
    pub snapshots: Vec<Synopsis>,
    pub predictions: Vec<(u64, Label)>,
    pub drifts: Vec<u64>,
    pub unscored: u64,
}

#[derive(Clone, Debug)]
pub struct EvaluatorConfig {
    pub window: usize,
    pub curve_every: u64,
    pub snapshot_every: Option<u64>,
    pub adwin_delta: Option<f64>,
    pub measure_throughput: bool,
    pub keep_predictions: bool,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        Self {
            window: crate::eval::DEFAULT_WINDOW,
            curve_every: 1000,
            snapshot_every: None,
            adwin_delta: None,
            measure_throughput: false,
            keep_predictions: false,
        }
    }
}

pub type OutcomeSink = Arc<Mutex<Option<EvaluationOutcome>>>;

pub struct EvaluatorBolt {
    config: EvaluatorConfig,
    evaluator: SlidingWindowEvaluator,
    started: Option<Instant>,
    top_tokens: Vec<TokenCount>,
    model: Option<ModelSummary>,
    rows: Vec<MetricsRow>,
    curve: Vec<CurvePoint>,
    snapshots: Vec<Synopsis>,
    predictions: Vec<(u64, Label)>,
    unscored: u64,
    sink: OutcomeSink,
    on_snapshot: Option<Box<dyn FnMut(&Synopsis) + Send>>,
}

impl EvaluatorBolt {
    pub fn new(config: EvaluatorConfig, sink: OutcomeSink) -> Self {
        let mut evaluator = SlidingWindowEvaluator::new(config.window);
        if let Some(delta) = config.adwin_delta {
            evaluator =
                evaluator.with_detector(crate::changedetect::AdaptiveWindow::new(delta).expect("validated delta"));
        }
        Self {
            config,
            evaluator,
            started: None,
            top_tokens: Vec::new(),
            model: None,
            rows: Vec::new(),
            curve: Vec::new(),
            snapshots: Vec::new(),
            predictions: Vec::new(),
            unscored: 0,
            sink,
            on_snapshot: None,
        }
    }

    /// Called with every periodic snapshot, e.g. to persist it.
    pub fn on_snapshot(mut self, f: Box<dyn FnMut(&Synopsis) + Send>) -> Self {
        self.on_snapshot = Some(f);
        self
    }

    fn metrics(&self) -> Metrics {
        let mut m = self.evaluator.metrics();
        if self.config.measure_throughput {
            if let Some(t) = self.started {
                let secs = t.elapsed().as_secs_f64();
                if secs > 0.0 {
                    m.throughput = Some(self.evaluator.seen() as f64 / secs);
                }
            }
        }
        m
    }

    fn synopsis(&self) -> Synopsis {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        let mut s = snapshot(&self.evaluator, self.top_tokens.clone(), self.model.clone(), now);
        s.metrics = self.metrics();
        s
    }
}

impl Bolt<Payload> for EvaluatorBolt {
    fn process(&mut self, input: Delivery<Payload>, _out: &mut Emitter<Payload>) -> HandlerResult {
        match input.event.payload {
            Payload::TopTokens(t) => self.top_tokens = t,
            Payload::Model(m) => self.model = Some(m),
            Payload::Prediction(p) => {
                self.started.get_or_insert_with(Instant::now);
                if self.config.keep_predictions {
                    self.predictions.push((p.seq, p.predicted));
                }
                let Some(actual) = p.actual else {
                    self.unscored += 1;
                    return Ok(());
                };
                self.evaluator.record(p.predicted, actual);
                let seen = self.evaluator.seen();
                if seen.is_multiple_of(self.config.window as u64) {
                    self.rows.push(MetricsRow {
                        window_index: seen / self.config.window as u64 - 1,
                        instances: seen,
                        metrics: self.metrics(),
                    });
                }
                if seen.is_multiple_of(self.config.curve_every) {
                    self.curve.push(CurvePoint {
                        instances: seen,
                        kappa: self.evaluator.metrics().kappa,
                    });
                }
                if self.config.snapshot_every.is_some_and(|n| seen.is_multiple_of(n)) {
                    let s = self.synopsis();
                    if let Some(f) = self.on_snapshot.as_mut() {
                        f(&s);
                    }
                    self.snapshots.push(s);
                }
            }
            other => return Err(unexpected("evaluator", &other)),
        }
        Ok(())
    }

    fn finish(&mut self, _out: &mut Emitter<Payload>) -> HandlerResult {
        let outcome = EvaluationOutcome {
            rows: std::mem::take(&mut self.rows),
            curve: std::mem::take(&mut self.curve),
            synopsis: self.synopsis(),
            snapshots: std::mem::take(&mut self.snapshots),
            predictions: std::mem::take(&mut self.predictions),
            drifts: self.evaluator.drifts().to_vec(),
            unscored: self.unscored,
        };
        *self.sink.lock().unwrap_or_else(|p| p.into_inner()) = Some(outcome);
        Ok(())
    }
}

/// Records every payload it receives.
pub struct CollectorBolt {
    sink: Arc<Mutex<Vec<Payload>>>,
}

impl CollectorBolt {
    pub fn new(sink: Arc<Mutex<Vec<Payload>>>) -> Self {
        Self { sink }
    }
}

impl Bolt<Payload> for CollectorBolt {
    fn process(&mut self, input: Delivery<Payload>, _out: &mut Emitter<Payload>) -> HandlerResult {
        self.sink.lock().unwrap_or_else(|p| p.into_inner()).push(input.event.payload);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LearnerKind {
    NaiveBayes,
    HoeffdingTree,
    Vertical,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::NaiveBayes => "mnb",
            LearnerKind::HoeffdingTree => "ht",
            LearnerKind::Vertical => "vht",
        }
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mnb" | "nb" => Ok(LearnerKind::NaiveBayes),
            "ht" => Ok(LearnerKind::HoeffdingTree),
            "vht" => Ok(LearnerKind::Vertical),
            _ => Err(format!("unknown learner `{s}` (expected mnb, ht or vht)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub tree: TreeParams,
    pub alpha: f64,
    pub parallelism: usize,
    pub timeout_events: Option<u64>,
    pub summary_every: Option<u64>,
}

impl LearnerConfig {
    pub fn new(kind: LearnerKind) -> Self {
        Self {
            kind,
            tree: TreeParams::default(),
            alpha: 1.0,
            parallelism: 1,
            timeout_events: None,
            summary_every: None,
        }
    }
}

pub type AggregatorSink = Arc<Mutex<Option<ModelAggregator>>>;

/// Adds the learner tier between `upstream` (emitting on
/// [`STREAM_INSTANCES`]) and `downstream` (receiving predictions and model
/// summaries). The vertical tree's final aggregator is written to `sink`.
pub fn add_learner(
    spec: TopologySpec,
    registry: HandlerRegistry<Payload>,
    upstream: &str,
    downstream: &str,
    config: LearnerConfig,
    sink: Option<AggregatorSink>,
) -> (TopologySpec, HandlerRegistry<Payload>) {
    match config.kind {
        LearnerKind::NaiveBayes | LearnerKind::HoeffdingTree => {
            let spec = spec
                .bolt("learner", 1, "learner")
                .stream(STREAM_INSTANCES, upstream, "learner", Grouping::Shuffle)
                .stream(STREAM_PREDICTIONS, "learner", downstream, Grouping::Shuffle)
                .stream(STREAM_MODEL, "learner", downstream, Grouping::All);
            let registry = registry.bolt("learner", move |_| {
                let learner: Box<dyn OnlineLearner> = match config.kind {
                    LearnerKind::NaiveBayes => Box::new(NaiveBayes::new(config.alpha)),
                    _ => Box::new(HoeffdingTree::new(config.tree)),
                };
                Box::new(LearnerBolt::new(learner).with_summaries(config.summary_every))
            });
            (spec, registry)
        }
        LearnerKind::Vertical => {
            let params = VhtParams {
                tree: config.tree,
                parallelism: config.parallelism,
                timeout_events: config.timeout_events,
            };
            let spec = spec
                .bolt("vht-aggregator", 1, "vht-aggregator")
                .bolt("vht-local", config.parallelism, "vht-local")
                .stream(STREAM_INSTANCES, upstream, "vht-aggregator", Grouping::Shuffle)
                .stream(STREAM_ATTRIBUTE, "vht-aggregator", "vht-local", Grouping::key("attribute"))
                .stream(STREAM_CONTROL, "vht-aggregator", "vht-local", Grouping::All)
                .feedback_stream(STREAM_LOCAL_RESULT, "vht-local", "vht-aggregator", Grouping::key("leaf"))
                .stream(STREAM_PREDICTIONS, "vht-aggregator", downstream, Grouping::Shuffle)
                .stream(STREAM_MODEL, "vht-aggregator", downstream, Grouping::All);
            let registry = registry
                .bolt("vht-aggregator", move |_| {
                    Box::new(
                        AggregatorBolt::new(ModelAggregator::new(params))
                            .with_summaries(config.summary_every)
                            .with_sink(sink.clone()),
                    )
                })
                .bolt("vht-local", |ctx| Box::new(LocalStatisticsBolt::new(ctx.index)));
            (spec, registry)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_policy() {
        use Label::*;
        let s = LabelSource::EmoticonThenGold;
        assert_eq!(s.training_label(Some(Positive), Some(Negative)), Some(Positive));
        assert_eq!(s.training_label(None, Some(Negative)), Some(Negative));
        assert_eq!(s.training_label(None, Some(Neutral)), None);
        assert_eq!(LabelSource::Emoticon.training_label(None, Some(Negative)), None);
        assert_eq!(LabelSource::Gold.training_label(Some(Positive), None), None);
    }

    #[test]
    fn learner_names_round_trip() {
        for k in [LearnerKind::NaiveBayes, LearnerKind::HoeffdingTree, LearnerKind::Vertical] {
            assert_eq!(k.name().parse::<LearnerKind>().unwrap(), k);
        }
        assert!("svm".parse::<LearnerKind>().is_err());
    }
}

//! Wires source, pipeline, learner and evaluator into one topology and
//! runs it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};

use crate::engine::{
    build_topology, run, Grouping, HandlerRegistry, QueueCapacity, RunMode, RunOptions, RunReport, SpoutOverflow,
    TopologySpec,
};
use crate::eval::Synopsis;
use crate::flow::{
    add_learner, DocumentSpout, EvaluationOutcome, EvaluatorBolt, EvaluatorConfig, LabelSource, LearnerConfig,
    LearnerKind, MetricsRow, PipelineBolt, STREAM_DOCUMENTS, STREAM_TOP_TOKENS,
};
use crate::learners::TreeParams;
use crate::textpipe::{AdmitAll, Document, HeuristicFilter, LanguageFilter, PipelineConfig, TextPipeline};
use crate::vht::{ModelAggregator, DEFAULT_TIMEOUT_EVENTS};

use super::ingest;
use super::synthetic::SyntheticSpec;

pub const METRICS_HEADER: &str = "window_index,instances,accuracy_pct,kappa_pct,throughput_ips";
pub const CURVE_HEADER: &str = "instances_processed,kappa_pct";
/// Id prefix marking documents that are scored but never trained on.
pub const TEST_PREFIX: &str = "test:";

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Timeout {
    /// Off in deterministic runs, the default event count otherwise.
    Auto,
    Off,
    Events(u64),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub source: Source,
    pub test_input: Option<PathBuf>,
    pub learners: Vec<LearnerKind>,
    pub parallelism: usize,
    pub window: usize,
    pub sketch_capacity: usize,
    pub top_k: usize,
    pub vocabulary_cap: Option<usize>,
    pub tree: TreeParams,
    pub alpha: f64,
    pub adwin_delta: f64,
    pub deterministic: bool,
    pub seed: Option<u64>,
    pub timeout: Timeout,
    pub queue_capacity: usize,
    pub spout_overflow: SpoutOverflow,
    pub label_source: LabelSource,
    pub language_filter: bool,
    pub curve_every: u64,
    pub snapshot_every: Option<u64>,
    pub synopsis_top: usize,
    pub metrics_csv: Option<PathBuf>,
    pub curve_csv: Option<PathBuf>,
    pub synopsis_path: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: Source::Synthetic(SyntheticSpec::default()),
            test_input: None,
            learners: vec![LearnerKind::HoeffdingTree],
            parallelism: 1,
            window: crate::eval::DEFAULT_WINDOW,
            sketch_capacity: 2000,
            top_k: 1000,
            vocabulary_cap: None,
            tree: TreeParams::default(),
            alpha: 1.0,
            adwin_delta: 0.01,
            deterministic: false,
            seed: None,
            timeout: Timeout::Auto,
            queue_capacity: crate::engine::DEFAULT_QUEUE_CAPACITY,
            spout_overflow: SpoutOverflow::Block,
            label_source: LabelSource::default(),
            language_filter: true,
            curve_every: 1000,
            snapshot_every: None,
            synopsis_top: 20,
            metrics_csv: None,
            curve_csv: None,
            synopsis_path: None,
            snapshot_dir: None,
            report_path: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, x: f64| {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                bail!("{name} must lie strictly between 0 and 1 (got {x})")
            }
        };
        open_unit("split delta", self.tree.split_delta)?;
        open_unit("adwin delta", self.adwin_delta)?;
        if !(self.tree.tie_threshold >= 0.0) {
            bail!("tie threshold must be non-negative");
        }
        if !(self.alpha > 0.0) {
            bail!("alpha must be positive");
        }
        for (name, v) in [
            ("parallelism", self.parallelism),
            ("window", self.window),
            ("sketch capacity", self.sketch_capacity),
            ("top-k", self.top_k),
            ("queue capacity", self.queue_capacity),
        ] {
            if v == 0 {
                bail!("{name} must be at least 1");
            }
        }
        if self.tree.grace_period == 0 || self.curve_every == 0 || self.snapshot_every == Some(0) {
            bail!("grace period and reporting intervals must be at least 1");
        }
        if self.learners.is_empty() {
            bail!("no learner selected");
        }
        if matches!(self.source, Source::Synthetic(_)) && self.seed.is_none() {
            bail!("a seed is required for synthetic streams");
        }
        Ok(())
    }

    fn timeout_events(&self) -> Option<u64> {
        match self.timeout {
            Timeout::Auto if self.deterministic => None,
            Timeout::Auto => Some(DEFAULT_TIMEOUT_EVENTS),
            Timeout::Off => None,
            Timeout::Events(n) => Some(n),
        }
    }

    fn documents(&self) -> Result<Box<dyn Iterator<Item = Document> + Send>> {
        let train: Box<dyn Iterator<Item = Document> + Send> = match &self.source {
            Source::File(path) => Box::new(ingest::ingest(path)?.1),
            Source::Synthetic(spec) => Box::new(spec.generate(self.seed.unwrap_or_default())),
        };
        Ok(match &self.test_input {
            None => train,
            Some(path) => {
                let test = ingest::ingest(path)?.1.map(|mut d| {
                    d.id.insert_str(0, TEST_PREFIX);
                    d
                });
                Box::new(train.chain(test))
            }
        })
    }
}

/// Result of running one learner.
#[derive(Clone, Debug)]
pub struct LearnerRun {
    pub learner: LearnerKind,
    pub outcome: EvaluationOutcome,
    pub report: RunReport,
    pub aggregator: Option<ModelAggregator>,
    pub topology: String,
}

impl LearnerRun {
    pub fn final_metrics(&self) -> &crate::eval::Metrics {
        &self.outcome.synopsis.metrics
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{:.4}", 100.0 * x))
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let tp = r.metrics.throughput.map_or_else(String::new, |t| format!("{t:.1}"));
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.window_index,
            r.instances,
            pct(r.metrics.accuracy),
            pct(r.metrics.kappa),
            tp
        );
    }
    s
}

pub fn curve_csv(outcome: &EvaluationOutcome) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for p in &outcome.curve {
        let _ = writeln!(s, "{},{}", p.instances, pct(p.kappa));
    }
    s
}

/// Runs one learner over the configured stream, writing nothing to disk.
pub fn run_learner(config: &RunConfig, kind: LearnerKind) -> Result<LearnerRun> {
    config.validate()?;
    let docs = Mutex::new(Some(config.documents()?));
    let outcome_sink = Arc::new(Mutex::new(None));
    let aggregator_sink = Arc::new(Mutex::new(None));

    let spec = TopologySpec::new()
        .spout("source", 1, "source")
        .bolt("pipeline", 1, "pipeline")
        .bolt("evaluator", 1, "evaluator")
        .stream(STREAM_DOCUMENTS, "source", "pipeline", Grouping::Shuffle)
        .stream(STREAM_TOP_TOKENS, "pipeline", "evaluator", Grouping::All);

    let pipeline_config = PipelineConfig {
        sketch_capacity: config.sketch_capacity,
        top_k: config.top_k,
        vocabulary_cap: config.vocabulary_cap,
    };
    let language_filter = config.language_filter;
    let labels = config.label_source;
    let summary_every = config.snapshot_every;
    let summary_size = config.synopsis_top;
    let evaluator_config = EvaluatorConfig {
        window: config.window,
        curve_every: config.curve_every,
        snapshot_every: config.snapshot_every,
        adwin_delta: Some(config.adwin_delta),
        measure_throughput: !config.deterministic,
        keep_predictions: false,
    };
    let snapshot_dir = config.snapshot_dir.clone();
    let sink = outcome_sink.clone();
    let registry = HandlerRegistry::new()
        .spout("source", move |_| {
            let docs = docs
                .lock()
                .unwrap_or_else(|p| p.into_inner())
                .take()
                .unwrap_or_else(|| Box::new(std::iter::empty()));
            Box::new(DocumentSpout::new(docs))
        })
        .bolt("pipeline", move |_| {
            let filter: Box<dyn LanguageFilter> = if language_filter {
                Box::new(HeuristicFilter::default())
            } else {
                Box::new(AdmitAll)
            };
            Box::new(
                PipelineBolt::new(TextPipeline::with_filter(pipeline_config, filter), labels)
                    .predict_only(TEST_PREFIX)
                    .with_summaries(summary_every, summary_size),
            )
        })
        .bolt("evaluator", move |_| {
            let mut bolt = EvaluatorBolt::new(evaluator_config.clone(), sink.clone());
            if let Some(dir) = snapshot_dir.clone() {
                let name = kind.name();
                bolt = bolt.on_snapshot(Box::new(move |s: &Synopsis| {
                    let path = dir.join(format!("synopsis-{name}-{}.txt", s.metrics.instances_seen));
                    if let Err(e) = fs::write(&path, s.to_text()) {
                        eprintln!("warning: cannot write {}: {e}", path.display());
                    }
                }));
            }
            Box::new(bolt)
        });

    let learner = LearnerConfig {
        kind,
        tree: config.tree,
        alpha: config.alpha,
        parallelism: config.parallelism,
        timeout_events: config.timeout_events(),
        summary_every,
    };
    let (spec, registry) = add_learner(
        spec,
        registry,
        "pipeline",
        "evaluator",
        learner,
        Some(aggregator_sink.clone()),
    );
    let topology = build_topology(spec, &registry)?;
    let dump = topology.dump();
    let report = run(
        topology,
        RunOptions {
            mode: if config.deterministic {
                RunMode::Deterministic
            } else {
                RunMode::Concurrent
            },
            queue_capacity: QueueCapacity::Bounded(config.queue_capacity),
            spout_overflow: config.spout_overflow,
            record_log: false,
        },
    )?;
    let outcome = outcome_sink
        .lock()
        .unwrap_or_else(|p| p.into_inner())
        .take()
        .context("evaluator did not finish")?;
    let aggregator = aggregator_sink.lock().unwrap_or_else(|p| p.into_inner()).take();
    Ok(LearnerRun {
        learner: kind,
        outcome,
        report,
        aggregator,
        topology: dump,
    })
}

/// `metrics.csv` becomes `metrics-ht.csv` when several learners run.
fn per_learner(path: &Path, kind: LearnerKind, several: bool) -> PathBuf {
    if !several {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{}.{}", kind.name(), ext.to_string_lossy()),
        None => format!("{stem}-{}", kind.name()),
    };
    path.with_file_name(name)
}

fn write(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))
}

fn report_json(run: &LearnerRun) -> serde_json::Value {
    let r = &run.report;
    let m = run.final_metrics();
    serde_json::json!({
        "learner": run.learner.name(),
        "events_emitted": r.events_emitted,
        "events_delivered": r.events_delivered,
        "events_dropped_at_spout": r.events_dropped_at_spout,
        "wall_time_s": r.wall_time,
        "instances": m.instances_seen,
        "unscored": run.outcome.unscored,
        "accuracy": m.accuracy,
        "kappa": m.kappa,
        "drifts": run.outcome.drifts,
        "splits": run.aggregator.as_ref().map(|a| a.counters().splits),
        "timeouts": run.aggregator.as_ref().map(|a| a.counters().timeouts),
        "topology": run.topology,
    })
}

/// Runs every configured learner in turn and writes the requested
/// artifacts.
pub fn run_experiment(config: &RunConfig) -> Result<Vec<LearnerRun>> {
    config.validate()?;
    let several = config.learners.len() > 1;
    let mut runs = Vec::new();
    for &kind in &config.learners {
        let run = run_learner(config, kind)?;
        if let Some(p) = &config.metrics_csv {
            write(&per_learner(p, kind, several), &metrics_csv(&run.outcome.rows))?;
        }
        if let Some(p) = &config.curve_csv {
            write(&per_learner(p, kind, several), &curve_csv(&run.outcome))?;
        }
        if let Some(p) = &config.synopsis_path {
            write(&per_learner(p, kind, several), &run.outcome.synopsis.to_text())?;
        }
        runs.push(run);
    }
    if let Some(p) = &config.report_path {
        let all: Vec<_> = runs.iter().map(report_json).collect();
        write(p, &serde_json::to_string_pretty(&all)?)?;
    }
    Ok(runs)
}

/// Final accuracy, kappa and wall time per learner.
pub fn summary_table(runs: &[LearnerRun]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:>10} {:>10} {:>10} {:>10}", "learner", "instances", "accuracy", "kappa", "time_s");
    for r in runs {
        let m = r.final_metrics();
        let show = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{:.2}%", 100.0 * x));
        let _ = writeln!(
            s,
            "{:<8} {:>10} {:>10} {:>10} {:>10.2}",
            r.learner.name(),
            m.instances_seen,
            show(m.accuracy),
            show(m.kappa),
            r.report.wall_time
        );
        if let Some(first) = r.outcome.drifts.first() {
            let _ = writeln!(
                s,
                "  {} drift detections, first at instance {first}",
                r.outcome.drifts.len()
            );
        }
    }
    s
}

/// Reads a synopsis file and renders it.
pub fn query_synopsis(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read snapshot {}", path.display()))?;
    let s = Synopsis::parse(&text).with_context(|| format!("corrupt snapshot {}", path.display()))?;
    Ok(s.render())
}

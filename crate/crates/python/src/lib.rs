//! Python bindings for the sentistream core.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sentistream::changedetect::AdaptiveWindow as CoreAdaptiveWindow;
use sentistream::cli::{run_experiment as core_run_experiment, RunConfig, Source, SyntheticSpec};
use sentistream::eval::{ConfusionMatrix, SlidingWindowEvaluator};
use sentistream::flow::LearnerKind;
use sentistream::instance::{Label, SparseInstance};
use sentistream::learners::{
    hoeffding_bound as core_hoeffding_bound, HoeffdingTree as CoreHoeffdingTree, NaiveBayes as CoreNaiveBayes,
    OnlineLearner, ShapeNode, TreeParams,
};
use sentistream::sketch::SpaceSaving as CoreSpaceSaving;
use sentistream::textpipe::{AdmitAll, Document, HeuristicFilter, LanguageFilter, PipelineConfig};
use sentistream::vht::{VerticalTree as CoreVerticalTree, VhtParams};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_label(label: Option<&str>) -> PyResult<Option<Label>> {
    label.map(|l| l.parse::<Label>().map_err(value_error)).transpose()
}

fn instance(features: HashMap<u32, f64>, label: Option<&str>) -> PyResult<SparseInstance> {
    let mut features: Vec<(u32, f64)> = features.into_iter().collect();
    features.sort_unstable_by_key(|&(a, _)| a);
    SparseInstance::new(features, parse_label(label)?).map_err(value_error)
}

fn tree_params(split_delta: f64, tie_threshold: f64, grace_period: u64) -> PyResult<TreeParams> {
    if !(split_delta > 0.0 && split_delta < 1.0) || tie_threshold < 0.0 || grace_period == 0 {
        return Err(PyValueError::new_err("invalid tree parameters"));
    }
    Ok(TreeParams {
        split_delta,
        tie_threshold,
        grace_period,
    })
}

/// Preorder shape: split attribute ids, `None` for leaves.
fn shape_list(shape: Vec<ShapeNode>) -> Vec<Option<u32>> {
    shape
        .into_iter()
        .map(|n| match n {
            ShapeNode::Split(a) => Some(a),
            ShapeNode::Leaf => None,
        })
        .collect()
}

#[pyclass]
struct SpaceSaving {
    inner: CoreSpaceSaving<String>,
}

#[pymethods]
impl SpaceSaving {
    #[new]
    fn new(capacity: usize) -> PyResult<Self> {
        if capacity == 0 {
            return Err(PyValueError::new_err("capacity must be positive"));
        }
        Ok(Self {
            inner: CoreSpaceSaving::new(capacity),
        })
    }

    fn offer(&mut self, item: String) {
        self.inner.offer(item);
    }

    /// `(count, error)` for a monitored item.
    fn estimate(&self, item: String) -> Option<(u64, u64)> {
        self.inner.estimate(&item)
    }

    fn top(&self, j: usize) -> Vec<(String, u64, u64)> {
        self.inner.top(j).into_iter().map(|e| (e.item, e.count, e.error)).collect()
    }

    #[getter]
    fn min_count(&self) -> u64 {
        self.inner.min_count()
    }

    #[getter]
    fn stream_len(&self) -> u64 {
        self.inner.stream_len()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass]
struct AdaptiveWindow {
    inner: CoreAdaptiveWindow,
}

#[pymethods]
impl AdaptiveWindow {
    #[new]
    #[pyo3(signature = (delta = 0.002))]
    fn new(delta: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreAdaptiveWindow::new(delta).map_err(value_error)?,
        })
    }

    /// Adds a value in [0, 1]; returns whether the window shrank.
    fn update(&mut self, x: f64) -> PyResult<bool> {
        self.inner.update(x).map_err(value_error)
    }

    #[getter]
    fn width(&self) -> u64 {
        self.inner.width()
    }

    #[getter]
    fn mean(&self) -> Option<f64> {
        self.inner.mean().ok()
    }

    #[getter]
    fn detections(&self) -> u64 {
        self.inner.detections()
    }
}

#[pyclass]
struct NaiveBayes {
    inner: CoreNaiveBayes,
}

#[pymethods]
impl NaiveBayes {
    #[new]
    #[pyo3(signature = (alpha = 1.0))]
    fn new(alpha: f64) -> PyResult<Self> {
        if !(alpha > 0.0) {
            return Err(PyValueError::new_err("alpha must be positive"));
        }
        Ok(Self {
            inner: CoreNaiveBayes::new(alpha),
        })
    }

    fn train(&mut self, features: HashMap<u32, f64>, label: &str) -> PyResult<()> {
        self.inner.train(&instance(features, Some(label))?).map_err(value_error)
    }

    fn predict(&self, features: HashMap<u32, f64>) -> PyResult<String> {
        Ok(OnlineLearner::predict(&self.inner, &instance(features, None)?).to_string())
    }

    /// Log-posterior per class (negative, neutral, positive).
    fn scores(&self, features: HashMap<u32, f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.scores(&instance(features, None)?).map_err(value_error)?.to_vec())
    }

    #[getter]
    fn state_bytes(&self) -> usize {
        self.inner.state_bytes()
    }
}

#[pyclass]
struct HoeffdingTree {
    inner: CoreHoeffdingTree,
}

#[pymethods]
impl HoeffdingTree {
    #[new]
    #[pyo3(signature = (split_delta = 1e-7, tie_threshold = 0.05, grace_period = 200))]
    fn new(split_delta: f64, tie_threshold: f64, grace_period: u64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreHoeffdingTree::new(tree_params(split_delta, tie_threshold, grace_period)?),
        })
    }

    fn train(&mut self, features: HashMap<u32, f64>, label: &str) -> PyResult<()> {
        self.inner.train(&instance(features, Some(label))?).map_err(value_error)
    }

    fn predict(&self, features: HashMap<u32, f64>) -> PyResult<String> {
        Ok(self.inner.predict(&instance(features, None)?).to_string())
    }

    fn shape(&self) -> Vec<Option<u32>> {
        shape_list(self.inner.shape())
    }

    #[getter]
    fn state_bytes(&self) -> usize {
        self.inner.state_bytes()
    }
}

#[pyclass]
struct VerticalTree {
    inner: CoreVerticalTree,
}

#[pymethods]
impl VerticalTree {
    #[new]
    #[pyo3(signature = (parallelism = 1, split_delta = 1e-7, tie_threshold = 0.05, grace_period = 200))]
    fn new(parallelism: usize, split_delta: f64, tie_threshold: f64, grace_period: u64) -> PyResult<Self> {
        if parallelism == 0 {
            return Err(PyValueError::new_err("parallelism must be at least 1"));
        }
        let params = VhtParams::new(tree_params(split_delta, tie_threshold, grace_period)?, parallelism);
        Ok(Self {
            inner: CoreVerticalTree::new(params),
        })
    }

    /// Predicts, then trains on the instance; returns the prediction.
    fn process(&mut self, features: HashMap<u32, f64>, label: &str) -> PyResult<String> {
        let x = instance(features, Some(label))?;
        Ok(self.inner.process(&x).map_err(value_error)?.to_string())
    }

    fn predict(&self, features: HashMap<u32, f64>) -> PyResult<String> {
        Ok(OnlineLearner::predict(&self.inner, &instance(features, None)?).to_string())
    }

    fn shape(&self) -> Vec<Option<u32>> {
        shape_list(self.inner.shape())
    }
}

#[pyclass(unsendable)]
struct TextPipeline {
    inner: sentistream::textpipe::TextPipeline,
}

#[pymethods]
impl TextPipeline {
    #[new]
    #[pyo3(signature = (sketch_capacity = 2000, top_k = 1000, vocabulary_cap = None, language_filter = true))]
    fn new(sketch_capacity: usize, top_k: usize, vocabulary_cap: Option<usize>, language_filter: bool) -> PyResult<Self> {
        if sketch_capacity == 0 || top_k == 0 {
            return Err(PyValueError::new_err("sketch capacity and top-k must be positive"));
        }
        let config = PipelineConfig {
            sketch_capacity,
            top_k,
            vocabulary_cap,
        };
        let filter: Box<dyn LanguageFilter> = if language_filter {
            Box::new(HeuristicFilter::default())
        } else {
            Box::new(AdmitAll)
        };
        Ok(Self {
            inner: sentistream::textpipe::TextPipeline::with_filter(config, filter),
        })
    }

    /// Returns `None` for rejected or empty documents, otherwise a dict
    /// with `id`, `features`, `emoticon_label` and `gold_label`.
    #[pyo3(signature = (text, id = "", lang = None, label = None))]
    fn process<'py>(
        &mut self,
        py: Python<'py>,
        text: &str,
        id: &str,
        lang: Option<String>,
        label: Option<&str>,
    ) -> PyResult<Option<Bound<'py, PyDict>>> {
        let doc = Document {
            id: id.to_string(),
            text: text.to_string(),
            lang,
            timestamp: None,
            label: parse_label(label)?,
        };
        let Some(p) = self.inner.process(&doc) else {
            return Ok(None);
        };
        let out = PyDict::new(py);
        out.set_item("id", p.id)?;
        let features: HashMap<u32, f64> = p.instance.features().iter().copied().collect();
        out.set_item("features", features)?;
        out.set_item("emoticon_label", p.emoticon_label.map(|l| l.to_string()))?;
        out.set_item("gold_label", p.gold_label.map(|l| l.to_string()))?;
        Ok(Some(out))
    }

    fn top_tokens(&self, j: usize) -> Vec<(String, u64, u64)> {
        self.inner.top_tokens(j)
    }

    fn token(&self, id: u32) -> Option<String> {
        self.inner.vocabulary().token(id).map(str::to_string)
    }

    fn idf(&self, token: &str) -> Option<f64> {
        self.inner.vocabulary().id(token).map(|id| self.inner.vocabulary().idf(id))
    }

    #[getter]
    fn state_bytes(&self) -> usize {
        self.inner.state_bytes()
    }
}

#[pyclass]
struct Evaluator {
    inner: SlidingWindowEvaluator,
}

#[pymethods]
impl Evaluator {
    #[new]
    #[pyo3(signature = (window = 10000, adwin_delta = None))]
    fn new(window: usize, adwin_delta: Option<f64>) -> PyResult<Self> {
        if window == 0 {
            return Err(PyValueError::new_err("window must be positive"));
        }
        let mut inner = SlidingWindowEvaluator::new(window);
        if let Some(delta) = adwin_delta {
            inner = inner.with_detector(CoreAdaptiveWindow::new(delta).map_err(value_error)?);
        }
        Ok(Self { inner })
    }

    /// Records one prediction; returns whether drift was signalled.
    fn record(&mut self, predicted: &str, actual: &str) -> PyResult<bool> {
        let p = predicted.parse::<Label>().map_err(value_error)?;
        let a = actual.parse::<Label>().map_err(value_error)?;
        Ok(self.inner.record(p, a))
    }

    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let m = self.inner.metrics();
        let out = PyDict::new(py);
        out.set_item("instances_seen", m.instances_seen)?;
        out.set_item("instances_in_window", m.instances_in_window)?;
        out.set_item("accuracy", m.accuracy)?;
        out.set_item("kappa", m.kappa)?;
        Ok(out)
    }

    #[getter]
    fn drifts(&self) -> Vec<u64> {
        self.inner.drifts().to_vec()
    }
}

/// Cohen's kappa of a square confusion matrix (rows are actual classes).
#[pyfunction]
fn kappa(rows: Vec<Vec<u64>>) -> PyResult<f64> {
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows.len()) {
        return Err(PyValueError::new_err("confusion matrix must be square and non-empty"));
    }
    ConfusionMatrix::from_rows(&rows).kappa().map_err(value_error)
}

#[pyfunction]
fn hoeffding_bound(range: f64, delta: f64, n: u64) -> PyResult<f64> {
    if !(range > 0.0 && delta > 0.0 && delta <= 1.0 && n >= 1) {
        return Err(PyValueError::new_err("need range > 0, 0 < delta <= 1 and n >= 1"));
    }
    Ok(core_hoeffding_bound(range, delta, n))
}

/// Runs learners over a seeded synthetic stream and returns one dict of
/// final metrics per learner.
#[pyfunction]
#[pyo3(signature = (synthetic, seed, learners = "ht", parallelism = 1, window = 10000, deterministic = true))]
fn run_experiment<'py>(
    py: Python<'py>,
    synthetic: &str,
    seed: u64,
    learners: &str,
    parallelism: usize,
    window: usize,
    deterministic: bool,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let spec: SyntheticSpec = synthetic.parse().map_err(value_error)?;
    let learners = learners
        .split(',')
        .map(|l| l.trim().parse::<LearnerKind>().map_err(value_error))
        .collect::<PyResult<Vec<_>>>()?;
    let config = RunConfig {
        source: Source::Synthetic(spec),
        learners,
        parallelism,
        window,
        deterministic,
        seed: Some(seed),
        ..RunConfig::default()
    };
    let runs = py
        .detach(|| core_run_experiment(&config))
        .map_err(|e| PyRuntimeError::new_err(format!("{e:#}")))?;
    runs.iter()
        .map(|r| {
            let m = r.final_metrics();
            let out = PyDict::new(py);
            out.set_item("learner", r.learner.name())?;
            out.set_item("instances", m.instances_seen)?;
            out.set_item("accuracy", m.accuracy)?;
            out.set_item("kappa", m.kappa)?;
            out.set_item("drifts", r.outcome.drifts.clone())?;
            Ok(out)
        })
        .collect()
}

#[pymodule]
fn pysentistream(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SpaceSaving>()?;
    m.add_class::<AdaptiveWindow>()?;
    m.add_class::<NaiveBayes>()?;
    m.add_class::<HoeffdingTree>()?;
    m.add_class::<VerticalTree>()?;
    m.add_class::<TextPipeline>()?;
    m.add_class::<Evaluator>()?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(hoeffding_bound, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}

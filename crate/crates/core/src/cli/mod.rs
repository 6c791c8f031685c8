//! Command-line entry point.

pub mod experiment;
pub mod ingest;
pub mod synthetic;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use crate::engine::SpoutOverflow;
use crate::flow::{LabelSource, LearnerKind};
use crate::learners::TreeParams;

pub use experiment::{
    curve_csv, metrics_csv, query_synopsis, run_experiment, run_learner, summary_table, LearnerRun, RunConfig,
    Source, Timeout, CURVE_HEADER, METRICS_HEADER,
};
pub use ingest::{ingest, parse_line, IngestError, IngestStats};
pub use synthetic::{to_json_line, SyntheticSpec};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OverflowArg {
    Block,
    Drop,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LabelArg {
    Emoticon,
    Gold,
    Both,
}

/// Streaming sentiment classification over tweet-like text.
#[derive(Parser, Debug)]
#[command(name = "sentistream", version)]
pub struct Args {
    /// Line-delimited input: JSON records with a `text` field, or plain text.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Synthetic stream spec, e.g. `instances=50000,strength=0.4,drift=25000`.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Documents scored after the training stream but never trained on.
    #[arg(long)]
    pub test_input: Option<PathBuf>,
    /// Write the synthetic stream to this file as JSON lines and exit.
    #[arg(long, requires = "synthetic")]
    pub generate: Option<PathBuf>,
    /// Comma-separated learners: mnb, ht, vht.
    #[arg(long, default_value = "ht", value_delimiter = ',')]
    pub learner: Vec<LearnerKind>,
    /// Local-statistics instances of the vertical tree.
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    #[arg(long, default_value_t = 10_000)]
    pub window: usize,
    #[arg(long, default_value_t = 2000)]
    pub sketch_k: usize,
    #[arg(long, default_value_t = 1000)]
    pub top_k: usize,
    /// Stop adding tokens to the vocabulary after this many.
    #[arg(long)]
    pub vocab_cap: Option<usize>,
    #[arg(long, default_value_t = 1e-7)]
    pub split_delta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub tie_tau: f64,
    #[arg(long, default_value_t = 200)]
    pub grace: u64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub adwin_delta: f64,
    /// Single-threaded reproducible execution.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Split-attempt timeout in aggregator events, or `off`.
    #[arg(long)]
    pub timeout_events: Option<String>,
    #[arg(long, default_value_t = crate::engine::DEFAULT_QUEUE_CAPACITY)]
    pub queue_capacity: usize,
    /// Behaviour of the source when the pipeline falls behind.
    #[arg(long, value_enum, default_value = "block")]
    pub spout_overflow: OverflowArg,
    /// Which label trains the learners.
    #[arg(long, value_enum, default_value = "both")]
    pub label_source: LabelArg,
    /// Admit every document regardless of language.
    #[arg(long)]
    pub no_language_filter: bool,
    #[arg(long)]
    pub metrics_csv: Option<PathBuf>,
    #[arg(long)]
    pub curve_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub curve_every: u64,
    /// Write a synopsis snapshot every N scored instances.
    #[arg(long)]
    pub snapshot_every: Option<u64>,
    /// Directory for periodic snapshots.
    #[arg(long, default_value = ".")]
    pub snapshot_dir: PathBuf,
    /// Final synopsis file.
    #[arg(long)]
    pub synopsis: Option<PathBuf>,
    /// Tokens listed in each synopsis.
    #[arg(long, default_value_t = 20)]
    pub synopsis_top: usize,
    /// Run report (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Print a saved synopsis and exit.
    #[arg(long)]
    pub query: Option<PathBuf>,
}

impl Args {
    pub fn to_config(&self) -> Result<RunConfig> {
        let source = match (&self.input, &self.synthetic) {
            (Some(p), None) => Source::File(p.clone()),
            (None, Some(s)) => Source::Synthetic(s.parse()?),
            (None, None) => bail!("one of --input or --synthetic is required"),
            (Some(_), Some(_)) => bail!("--input and --synthetic are exclusive"),
        };
        let timeout = match self.timeout_events.as_deref() {
            None => Timeout::Auto,
            Some("off") => Timeout::Off,
            Some(n) => Timeout::Events(n.parse().context("--timeout-events takes a count or `off`")?),
        };
        let config = RunConfig {
            source,
            test_input: self.test_input.clone(),
            learners: self.learner.clone(),
            parallelism: self.parallelism,
            window: self.window,
            sketch_capacity: self.sketch_k,
            top_k: self.top_k,
            vocabulary_cap: self.vocab_cap,
            tree: TreeParams {
                split_delta: self.split_delta,
                tie_threshold: self.tie_tau,
                grace_period: self.grace,
            },
            alpha: self.alpha,
            adwin_delta: self.adwin_delta,
            deterministic: self.deterministic,
            seed: self.seed,
            timeout,
            queue_capacity: self.queue_capacity,
            spout_overflow: match self.spout_overflow {
                OverflowArg::Block => SpoutOverflow::Block,
                OverflowArg::Drop => SpoutOverflow::Drop,
            },
            label_source: match self.label_source {
                LabelArg::Emoticon => LabelSource::Emoticon,
                LabelArg::Gold => LabelSource::Gold,
                LabelArg::Both => LabelSource::EmoticonThenGold,
            },
            language_filter: !self.no_language_filter,
            curve_every: self.curve_every,
            snapshot_every: self.snapshot_every,
            synopsis_top: self.synopsis_top,
            metrics_csv: self.metrics_csv.clone(),
            curve_csv: self.curve_csv.clone(),
            synopsis_path: self.synopsis.clone(),
            snapshot_dir: self.snapshot_every.map(|_| self.snapshot_dir.clone()),
            report_path: self.report.clone(),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Executes the parsed command line, writing human output to `out`.
pub fn execute(args: &Args, out: &mut dyn Write) -> Result<()> {
    if let Some(path) = &args.query {
        out.write_all(query_synopsis(path)?.as_bytes())?;
        return Ok(());
    }
    if let Some(path) = &args.generate {
        let spec: SyntheticSpec = args.synthetic.as_deref().unwrap_or_default().parse()?;
        let seed = args.seed.context("a seed is required for synthetic streams")?;
        let mut file = std::io::BufWriter::new(
            std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        );
        for d in spec.generate(seed) {
            file.write_all(to_json_line(&d).as_bytes())?;
        }
        file.flush()?;
        return Ok(());
    }
    let config = args.to_config()?;
    let runs = run_experiment(&config)?;
    out.write_all(summary_table(&runs).as_bytes())?;
    Ok(())
}

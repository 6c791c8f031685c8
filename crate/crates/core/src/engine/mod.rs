//! Minimal Storm-style dataflow runtime.
//!
//! A topology is a set of processing items (PIs) connected by labelled
//! streams. Spouts pull from external sources; bolts consume events and may
//! emit further events. Each PI is expanded into `parallelism` runtime
//! instances with private state, and every stream routes events to the
//! destination's instances by shuffle, all or key grouping.
//!
//! End-of-stream travels as an explicit flush marker along every stream.
//! A bolt finishes once all of its forward inputs have flushed; feedback
//! streams (loops back upstream) are drained but never gate termination.
//!
//! With bounded queues the only place events are lost is the spout intake:
//! spouts never block on a full downstream queue and drop instead, while
//! bolt-to-bolt sends apply backpressure.

mod routing;
mod runtime;
mod topology;

use thiserror::Error;

pub use routing::{key_index, route, stable_hash, Destinations, Grouping};
pub use runtime::{run, QueueCapacity, RunMode, RunOptions, RunReport, SpoutOverflow, DEFAULT_QUEUE_CAPACITY};
pub use topology::{
    build_topology, Bolt, ContentEvent, Delivery, Emitter, HandlerRegistry, HandlerResult, InstanceContext,
    PiKind, PiSpec, Spout, SpoutStatus, StreamSpec, Topology, TopologySpec,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("duplicate processing item name `{0}`")]
    DuplicatePi(String),
    #[error("stream `{stream}` references unknown processing item `{name}`")]
    DanglingEndpoint { stream: String, name: String },
    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("processing item `{0}` must have parallelism >= 1")]
    InvalidParallelism(String),
    #[error("stream `{stream}` targets spout `{spout}`")]
    StreamIntoSpout { stream: String, spout: String },
    #[error("key-grouped stream `{0}` has no key extractor")]
    MissingKeyExtractor(String),
    #[error("bolt `{0}` has no forward input stream")]
    BoltWithoutInput(String),
    #[error("bolt `{0}` is not reachable from any spout")]
    Unreachable(String),
    #[error("stream `{label}` from `{from}` to `{to}` declared twice")]
    DuplicateStream { label: String, from: String, to: String },
    #[error("no handler `{handler}` registered for `{pi}`")]
    MissingHandler { pi: String, handler: String },
    #[error("handler `{handler}` registered for `{pi}` has the wrong kind")]
    HandlerKindMismatch { pi: String, handler: String },
    #[error("key grouping on `{field}` but the event carries no key")]
    MissingKey { field: String },
    #[error("{pi}[{index}] failed: {message}")]
    HandlerFailed { pi: String, index: usize, message: String },
    #[error("{pi}[{index}] emitted after end-of-stream")]
    EmitAfterFlush { pi: String, index: usize },
    #[error("{pi}[{index}] lost its peer channel")]
    Disconnected { pi: String, index: usize },
}

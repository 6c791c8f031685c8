use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::routing::Grouping;
use super::EngineError;

pub type HandlerResult<T = ()> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PiKind {
    Spout,
    Bolt,
}

impl fmt::Display for PiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PiKind::Spout => "spout",
            PiKind::Bolt => "bolt",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiSpec {
    pub name: String,
    pub kind: PiKind,
    pub parallelism: usize,
    /// Identifier looked up in the [`HandlerRegistry`].
    pub handler: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub label: String,
    pub source: String,
    pub destination: String,
    pub grouping: Grouping,
    /// Feedback streams close a loop back to an upstream PI. They are
    /// excluded from the acyclicity check and never gate end-of-stream.
    pub feedback: bool,
}

/// Declarative description of processing items and the streams between
/// them. Handlers are referenced by identifier and resolved at build time.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub pis: Vec<PiSpec>,
    pub streams: Vec<StreamSpec>,
}

impl TopologySpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn spout(mut self, name: &str, parallelism: usize, handler: &str) -> Self {
        self.pis.push(PiSpec {
            name: name.to_string(),
            kind: PiKind::Spout,
            parallelism,
            handler: handler.to_string(),
        });
        self
    }

    pub fn bolt(mut self, name: &str, parallelism: usize, handler: &str) -> Self {
        self.pis.push(PiSpec {
            name: name.to_string(),
            kind: PiKind::Bolt,
            parallelism,
            handler: handler.to_string(),
        });
        self
    }

    pub fn stream(mut self, label: &str, source: &str, destination: &str, grouping: Grouping) -> Self {
        self.streams.push(StreamSpec {
            label: label.to_string(),
            source: source.to_string(),
            destination: destination.to_string(),
            grouping,
            feedback: false,
        });
        self
    }

    pub fn feedback_stream(
        mut self,
        label: &str,
        source: &str,
        destination: &str,
        grouping: Grouping,
    ) -> Self {
        self.streams.push(StreamSpec {
            label: label.to_string(),
            source: source.to_string(),
            destination: destination.to_string(),
            grouping,
            feedback: true,
        });
        self
    }

    /// One line per PI (`name kind parallelism`) followed by one line per
    /// stream (`src -> dst [grouping]`).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for pi in &self.pis {
            let _ = writeln!(out, "{} {} {}", pi.name, pi.kind, pi.parallelism);
        }
        for s in &self.streams {
            let _ = writeln!(out, "{} -> {} [{}]", s.source, s.destination, s.grouping);
        }
        out
    }

    /// Checks every structural invariant and returns the PI indices in
    /// topological order over forward streams.
    pub fn validate(&self) -> Result<Vec<usize>, EngineError> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, pi) in self.pis.iter().enumerate() {
            if index.insert(pi.name.as_str(), i).is_some() {
                return Err(EngineError::DuplicatePi(pi.name.clone()));
            }
            if pi.parallelism == 0 {
                return Err(EngineError::InvalidParallelism(pi.name.clone()));
            }
        }

        let n = self.pis.len();
        let mut forward: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut has_forward_input = vec![false; n];
        for s in &self.streams {
            let src = *index.get(s.source.as_str()).ok_or_else(|| EngineError::DanglingEndpoint {
                stream: s.label.clone(),
                name: s.source.clone(),
            })?;
            let dst = *index
                .get(s.destination.as_str())
                .ok_or_else(|| EngineError::DanglingEndpoint {
                    stream: s.label.clone(),
                    name: s.destination.clone(),
                })?;
            if self.pis[dst].kind == PiKind::Spout {
                return Err(EngineError::StreamIntoSpout {
                    stream: s.label.clone(),
                    spout: s.destination.clone(),
                });
            }
            if let Grouping::Key { field } = &s.grouping {
                if field.is_empty() {
                    return Err(EngineError::MissingKeyExtractor(s.label.clone()));
                }
            }
            if !s.feedback {
                forward[src].push(dst);
                has_forward_input[dst] = true;
            }
        }

        for (i, pi) in self.pis.iter().enumerate() {
            if pi.kind == PiKind::Bolt && !has_forward_input[i] {
                return Err(EngineError::BoltWithoutInput(pi.name.clone()));
            }
        }

        let order = self.topological_order(&forward)?;

        // Every bolt must be fed, directly or transitively, by a spout.
        let mut reached = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&i| self.pis[i].kind == PiKind::Spout).collect();
        for &s in &stack {
            reached[s] = true;
        }
        while let Some(u) = stack.pop() {
            for &v in &forward[u] {
                if !reached[v] {
                    reached[v] = true;
                    stack.push(v);
                }
            }
        }
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(EngineError::Unreachable(self.pis[i].name.clone()));
        }
        Ok(order)
    }

    fn topological_order(&self, forward: &[Vec<usize>]) -> Result<Vec<usize>, EngineError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let n = forward.len();
        let mut mark = vec![Mark::New; n];
        let mut post = Vec::with_capacity(n);
        for root in 0..n {
            if mark[root] != Mark::New {
                continue;
            }
            // Iterative DFS; `path` mirrors the active stack for cycle reports.
            let mut stack = vec![(root, 0usize)];
            let mut path = vec![root];
            mark[root] = Mark::Active;
            while let Some((u, next)) = stack.last_mut() {
                let u = *u;
                if let Some(&v) = forward[u].get(*next) {
                    *next += 1;
                    match mark[v] {
                        Mark::New => {
                            mark[v] = Mark::Active;
                            stack.push((v, 0));
                            path.push(v);
                        }
                        Mark::Active => {
                            let start = path.iter().position(|&p| p == v).unwrap_or(0);
                            let mut names: Vec<String> =
                                path[start..].iter().map(|&i| self.pis[i].name.clone()).collect();
                            names.push(self.pis[v].name.clone());
                            return Err(EngineError::Cycle(names));
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[u] = Mark::Done;
                    post.push(u);
                    stack.pop();
                    path.pop();
                }
            }
        }
        post.reverse();
        Ok(post)
    }
}

/// Identity of one runtime instance, handed to handler factories.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceContext {
    pub pi: String,
    pub index: usize,
    pub parallelism: usize,
}

/// Message envelope carried by streams.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentEvent<P> {
    pub payload: P,
    /// Routing key for key grouping.
    pub key: Option<Vec<u8>>,
    /// Strictly increasing per (source instance, stream).
    pub seq: u64,
}

/// An event as seen by a bolt.
#[derive(Clone, Debug)]
pub struct Delivery<P> {
    pub source: Arc<str>,
    pub source_index: usize,
    pub stream: Arc<str>,
    pub event: ContentEvent<P>,
}

pub(crate) struct Pending<P> {
    pub label: String,
    pub payload: P,
    pub key: Option<Vec<u8>>,
}

/// Output buffer handed to handlers; the runtime routes its contents after
/// the handler returns.
pub struct Emitter<P> {
    pub(crate) pending: Vec<Pending<P>>,
}

impl<P> Emitter<P> {
    pub(crate) fn new() -> Self {
        Self { pending: Vec::new() }
    }

    pub fn emit(&mut self, stream: &str, payload: P) {
        self.pending.push(Pending {
            label: stream.to_string(),
            payload,
            key: None,
        });
    }

    pub fn emit_keyed(&mut self, stream: &str, payload: P, key: Vec<u8>) {
        self.pending.push(Pending {
            label: stream.to_string(),
            payload,
            key: Some(key),
        });
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpoutStatus {
    /// More input may follow.
    Active,
    /// End of stream; the runtime flushes every outbound stream.
    Exhausted,
}

pub trait Spout<P>: Send {
    /// Pulls the next chunk of input from the external source.
    fn next(&mut self, out: &mut Emitter<P>) -> HandlerResult<SpoutStatus>;
}

pub trait Bolt<P>: Send {
    fn process(&mut self, input: Delivery<P>, out: &mut Emitter<P>) -> HandlerResult;

    /// Called once every forward input stream has delivered end-of-stream.
    /// Feedback events may still arrive afterwards but must not emit.
    fn finish(&mut self, _out: &mut Emitter<P>) -> HandlerResult {
        Ok(())
    }
}

type SpoutFactory<P> = Box<dyn Fn(&InstanceContext) -> Box<dyn Spout<P>> + Send + Sync>;
type BoltFactory<P> = Box<dyn Fn(&InstanceContext) -> Box<dyn Bolt<P>> + Send + Sync>;

/// Maps handler identifiers to constructors of per-instance state.
pub struct HandlerRegistry<P> {
    spouts: HashMap<String, SpoutFactory<P>>,
    bolts: HashMap<String, BoltFactory<P>>,
}

impl<P> Default for HandlerRegistry<P> {
    fn default() -> Self {
        Self {
            spouts: HashMap::new(),
            bolts: HashMap::new(),
        }
    }
}

impl<P> HandlerRegistry<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn spout<F>(mut self, id: &str, factory: F) -> Self
    where
        F: Fn(&InstanceContext) -> Box<dyn Spout<P>> + Send + Sync + 'static,
    {
        self.spouts.insert(id.to_string(), Box::new(factory));
        self
    }

    pub fn bolt<F>(mut self, id: &str, factory: F) -> Self
    where
        F: Fn(&InstanceContext) -> Box<dyn Bolt<P>> + Send + Sync + 'static,
    {
        self.bolts.insert(id.to_string(), Box::new(factory));
        self
    }
}

pub(crate) enum Handler<P> {
    Spout(Box<dyn Spout<P>>),
    Bolt(Box<dyn Bolt<P>>),
}

pub(crate) struct StreamPlan {
    pub label: Arc<str>,
    pub source: usize,
    pub destination: usize,
    pub grouping: Grouping,
    pub feedback: bool,
}

/// A validated topology with every PI expanded into independent instances.
pub struct Topology<P> {
    pub(crate) spec: TopologySpec,
    pub(crate) names: Vec<Arc<str>>,
    /// PI indices in forward topological order.
    pub(crate) order: Vec<usize>,
    pub(crate) streams: Vec<StreamPlan>,
    /// `instances[pi][i]` is the handler of instance `i` of PI `pi`.
    pub(crate) instances: Vec<Vec<Handler<P>>>,
}

impl<P> fmt::Debug for Topology<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Topology").field("spec", &self.spec).finish()
    }
}

impl<P> Topology<P> {
    pub fn spec(&self) -> &TopologySpec {
        &self.spec
    }

    /// Total number of runtime instances across all PIs.
    pub fn instance_count(&self) -> usize {
        self.instances.iter().map(Vec::len).sum()
    }

    pub fn dump(&self) -> String {
        self.spec.dump()
    }
}

/// Validates `spec`, resolves handlers and instantiates `parallelism`
/// independent handler states per PI.
pub fn build_topology<P>(spec: TopologySpec, registry: &HandlerRegistry<P>) -> Result<Topology<P>, EngineError> {
    let order = spec.validate()?;
    let index: HashMap<&str, usize> = spec.pis.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();

    let mut instances = Vec::with_capacity(spec.pis.len());
    for pi in &spec.pis {
        let mut handlers = Vec::with_capacity(pi.parallelism);
        for i in 0..pi.parallelism {
            let ctx = InstanceContext {
                pi: pi.name.clone(),
                index: i,
                parallelism: pi.parallelism,
            };
            let handler = match pi.kind {
                PiKind::Spout => match registry.spouts.get(&pi.handler) {
                    Some(f) => Handler::Spout(f(&ctx)),
                    None => return Err(missing_handler(pi, registry.bolts.contains_key(&pi.handler))),
                },
                PiKind::Bolt => match registry.bolts.get(&pi.handler) {
                    Some(f) => Handler::Bolt(f(&ctx)),
                    None => return Err(missing_handler(pi, registry.spouts.contains_key(&pi.handler))),
                },
            };
            handlers.push(handler);
        }
        instances.push(handlers);
    }

    let mut seen_labels: HashSet<(usize, &str, usize)> = HashSet::new();
    let mut streams = Vec::with_capacity(spec.streams.len());
    for s in &spec.streams {
        let source = index[s.source.as_str()];
        let destination = index[s.destination.as_str()];
        if !seen_labels.insert((source, s.label.as_str(), destination)) {
            return Err(EngineError::DuplicateStream {
                label: s.label.clone(),
                from: s.source.clone(),
                to: s.destination.clone(),
            });
        }
        streams.push(StreamPlan {
            label: Arc::from(s.label.as_str()),
            source,
            destination,
            grouping: s.grouping.clone(),
            feedback: s.feedback,
        });
    }

    let names = spec.pis.iter().map(|p| Arc::from(p.name.as_str())).collect();
    Ok(Topology {
        spec,
        names,
        order,
        streams,
        instances,
    })
}

fn missing_handler(pi: &PiSpec, wrong_kind: bool) -> EngineError {
    if wrong_kind {
        EngineError::HandlerKindMismatch {
            pi: pi.name.clone(),
            handler: pi.handler.clone(),
        }
    } else {
        EngineError::MissingHandler {
            pi: pi.name.clone(),
            handler: pi.handler.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Nop;
    impl Spout<u32> for Nop {
        fn next(&mut self, _out: &mut Emitter<u32>) -> HandlerResult<SpoutStatus> {
            Ok(SpoutStatus::Exhausted)
        }
    }
    impl Bolt<u32> for Nop {
        fn process(&mut self, _input: Delivery<u32>, _out: &mut Emitter<u32>) -> HandlerResult {
            Ok(())
        }
    }

    fn registry() -> HandlerRegistry<u32> {
        HandlerRegistry::new()
            .spout("src", |_| Box::new(Nop))
            .bolt("sink", |_| Box::new(Nop))
    }

    #[test]
    fn minimal_chain_builds_two_instances() {
        let spec = TopologySpec::new()
            .spout("s", 1, "src")
            .bolt("b", 1, "sink")
            .stream("out", "s", "b", Grouping::Shuffle);
        let topo = build_topology(spec, &registry()).unwrap();
        assert_eq!(topo.instance_count(), 2);
    }

    #[test]
    fn cycle_is_reported_with_names() {
        let spec = TopologySpec::new()
            .spout("s", 1, "src")
            .bolt("a", 1, "sink")
            .bolt("b", 1, "sink")
            .stream("x", "s", "a", Grouping::Shuffle)
            .stream("y", "a", "b", Grouping::Shuffle)
            .stream("z", "b", "a", Grouping::Shuffle);
        match spec.validate() {
            Err(EngineError::Cycle(names)) => {
                assert!(names.contains(&"a".to_string()));
                assert!(names.contains(&"b".to_string()));
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn feedback_streams_do_not_count_as_cycles() {
        let spec = TopologySpec::new()
            .spout("s", 1, "src")
            .bolt("a", 1, "sink")
            .bolt("b", 2, "sink")
            .stream("x", "s", "a", Grouping::Shuffle)
            .stream("y", "a", "b", Grouping::All)
            .feedback_stream("z", "b", "a", Grouping::key("aggregator"));
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn duplicate_and_dangling_names() {
        let dup = TopologySpec::new().spout("s", 1, "src").bolt("s", 1, "sink");
        assert_eq!(dup.validate(), Err(EngineError::DuplicatePi("s".into())));

        let dangling = TopologySpec::new()
            .spout("s", 1, "src")
            .stream("x", "s", "ghost", Grouping::Shuffle);
        assert!(matches!(
            dangling.validate(),
            Err(EngineError::DanglingEndpoint { ref name, .. }) if name == "ghost"
        ));
    }

    #[test]
    fn zero_parallelism_and_empty_key_field_rejected() {
        let zero = TopologySpec::new().spout("s", 0, "src");
        assert_eq!(zero.validate(), Err(EngineError::InvalidParallelism("s".into())));

        let nokey = TopologySpec::new()
            .spout("s", 1, "src")
            .bolt("b", 1, "sink")
            .stream("x", "s", "b", Grouping::key(""));
        assert_eq!(nokey.validate(), Err(EngineError::MissingKeyExtractor("x".into())));
    }

    #[test]
    fn handler_resolution_errors() {
        let spec = TopologySpec::new()
            .spout("s", 1, "sink")
            .bolt("b", 1, "sink")
            .stream("x", "s", "b", Grouping::Shuffle);
        assert!(matches!(
            build_topology(spec, &registry()),
            Err(EngineError::HandlerKindMismatch { .. })
        ));
        let spec = TopologySpec::new()
            .spout("s", 1, "nope")
            .bolt("b", 1, "sink")
            .stream("x", "s", "b", Grouping::Shuffle);
        assert!(matches!(
            build_topology(spec, &registry()),
            Err(EngineError::MissingHandler { .. })
        ));
    }

    #[test]
    fn dump_format() {
        let spec = TopologySpec::new()
            .spout("source", 1, "src")
            .bolt("stats", 4, "sink")
            .stream("attribute", "source", "stats", Grouping::key("attribute"));
        assert_eq!(
            spec.dump(),
            "source spout 1\nstats bolt 4\nsource -> stats [key:attribute]\n"
        );
    }
}

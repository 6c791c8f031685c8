use std::collections::{HashMap, VecDeque};
use std::fmt::Debug;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crossbeam_channel::{bounded, never, select, unbounded, Receiver, Sender, TrySendError};

use super::routing::route;
use super::topology::{ContentEvent, Delivery, Emitter, Handler, HandlerResult, SpoutStatus, Topology};
use super::EngineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    /// Single thread, fixed step order, reproducible interleavings.
    Deterministic,
    /// One worker thread per PI instance.
    Concurrent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueueCapacity {
    Bounded(usize),
    Unbounded,
}

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;

/// What a spout emission does when the destination inbox is full.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpoutOverflow {
    /// Discard the event and count it as dropped.
    Drop,
    /// Wait for space (backpressure on the source).
    Block,
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub mode: RunMode,
    /// Capacity of each bolt instance's forward inbox. Feedback inboxes are
    /// always unbounded so loops cannot deadlock.
    pub queue_capacity: QueueCapacity,
    pub spout_overflow: SpoutOverflow,
    /// Keep a textual log of every delivered event.
    pub record_log: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: RunMode::Deterministic,
            queue_capacity: QueueCapacity::Bounded(DEFAULT_QUEUE_CAPACITY),
            spout_overflow: SpoutOverflow::Drop,
            record_log: false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    /// Event copies sent along streams (one per destination instance).
    pub events_emitted: u64,
    pub events_delivered: u64,
    pub events_dropped_at_spout: u64,
    /// Seconds.
    pub wall_time: f64,
    /// Delivered events in delivery order (deterministic mode) or grouped
    /// per destination instance (concurrent mode). Empty unless requested.
    pub log: Vec<String>,
}

impl RunReport {
    /// Equality of everything except wall time.
    pub fn same_outcome(&self, other: &RunReport) -> bool {
        self.events_emitted == other.events_emitted
            && self.events_delivered == other.events_delivered
            && self.events_dropped_at_spout == other.events_dropped_at_spout
            && self.log == other.log
    }
}

/// Executes the topology until every spout is exhausted and all in-flight
/// events have drained.
pub fn run<P>(topology: Topology<P>, options: RunOptions) -> Result<RunReport, EngineError>
where
    P: Clone + Debug + Send + 'static,
{
    let start = Instant::now();
    let mut report = match options.mode {
        RunMode::Deterministic => Deterministic::new(topology, options).run()?,
        RunMode::Concurrent => run_concurrent(topology, options)?,
    };
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

fn guarded<T>(pi: &str, index: usize, f: impl FnOnce() -> HandlerResult<T>) -> Result<T, EngineError> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(EngineError::HandlerFailed {
            pi: pi.to_string(),
            index,
            message: e.to_string(),
        }),
        Err(p) => Err(EngineError::HandlerFailed {
            pi: pi.to_string(),
            index,
            message: format!("panicked: {}", panic_message(p)),
        }),
    }
}

fn log_line<P: Debug>(dst: &str, dst_idx: usize, d: &Delivery<P>) -> String {
    format!(
        "{dst}[{dst_idx}] <- {}[{}] {}#{} {:?}",
        d.source, d.source_index, d.stream, d.event.seq, d.event.payload
    )
}

/// Per-PI outbound streams grouped by label, in declaration order.
fn outbound_by_label<P>(topology: &Topology<P>) -> Vec<HashMap<Arc<str>, Vec<usize>>> {
    let mut out: Vec<HashMap<Arc<str>, Vec<usize>>> = vec![HashMap::new(); topology.names.len()];
    for (si, s) in topology.streams.iter().enumerate() {
        out[s.source].entry(s.label.clone()).or_default().push(si);
    }
    out
}

/// Number of end-of-stream markers each instance of every PI expects on
/// (forward, feedback) inputs.
fn expected_flushes<P>(topology: &Topology<P>) -> Vec<(usize, usize)> {
    let mut out = vec![(0, 0); topology.names.len()];
    for s in &topology.streams {
        let senders = topology.instances[s.source].len();
        if s.feedback {
            out[s.destination].1 += senders;
        } else {
            out[s.destination].0 += senders;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Deterministic mode
// ---------------------------------------------------------------------------

enum Envelope<P> {
    Event(Delivery<P>),
    Flush { feedback: bool },
}

struct Slot<P> {
    pi: usize,
    index: usize,
    handler: Handler<P>,
    inbox: VecDeque<Envelope<P>>,
    forward_expected: usize,
    forward_seen: usize,
    finished: bool,
    cursors: Vec<usize>,
    seqs: Vec<u64>,
}

struct Deterministic<P> {
    names: Vec<Arc<str>>,
    streams: Vec<super::topology::StreamPlan>,
    outbound: Vec<HashMap<Arc<str>, Vec<usize>>>,
    /// First global slot id of each PI.
    base: Vec<usize>,
    parallelism: Vec<usize>,
    slots: Vec<Slot<P>>,
    /// Slot ids in step order: PIs in topological order, then instance index.
    step_order: Vec<usize>,
    options: RunOptions,
    report: RunReport,
}

impl<P: Clone + Debug> Deterministic<P> {
    fn new(topology: Topology<P>, options: RunOptions) -> Self {
        let outbound = outbound_by_label(&topology);
        let expected = expected_flushes(&topology);
        let n_streams = topology.streams.len();
        let parallelism: Vec<usize> = topology.instances.iter().map(Vec::len).collect();
        let mut base = Vec::with_capacity(parallelism.len());
        let mut acc = 0;
        for p in &parallelism {
            base.push(acc);
            acc += p;
        }
        let mut slots = Vec::with_capacity(acc);
        for (pi, handlers) in topology.instances.into_iter().enumerate() {
            for (index, handler) in handlers.into_iter().enumerate() {
                slots.push(Slot {
                    pi,
                    index,
                    handler,
                    inbox: VecDeque::new(),
                    forward_expected: expected[pi].0,
                    forward_seen: 0,
                    finished: false,
                    cursors: vec![0; n_streams],
                    seqs: vec![0; n_streams],
                });
            }
        }
        let step_order = topology
            .order
            .iter()
            .flat_map(|&pi| (base[pi]..base[pi] + parallelism[pi]).collect::<Vec<_>>())
            .collect();
        Self {
            names: topology.names,
            streams: topology.streams,
            outbound,
            base,
            parallelism,
            slots,
            step_order,
            options,
            report: RunReport::default(),
        }
    }

    fn run(mut self) -> Result<RunReport, EngineError> {
        let spouts: Vec<usize> = self
            .step_order
            .iter()
            .copied()
            .filter(|&g| matches!(self.slots[g].handler, Handler::Spout(_)))
            .collect();
        let bolts: Vec<usize> = self
            .step_order
            .iter()
            .copied()
            .filter(|&g| matches!(self.slots[g].handler, Handler::Bolt(_)))
            .collect();

        loop {
            let mut progressed = false;
            for &g in &bolts {
                if let Some(env) = self.slots[g].inbox.pop_front() {
                    self.handle(g, env)?;
                    progressed = true;
                }
            }
            if progressed {
                continue;
            }
            // Everything downstream is idle: pull the spouts.
            let mut active = false;
            for &g in &spouts {
                if self.slots[g].finished {
                    continue;
                }
                active = true;
                let mut em = Emitter::new();
                let (pi, index) = (self.slots[g].pi, self.slots[g].index);
                let name = self.names[pi].clone();
                let status = match &mut self.slots[g].handler {
                    Handler::Spout(s) => guarded(&name, index, || s.next(&mut em))?,
                    Handler::Bolt(_) => unreachable!(),
                };
                self.dispatch(g, em, true)?;
                if status == SpoutStatus::Exhausted {
                    self.slots[g].finished = true;
                    self.flush_outputs(g);
                }
            }
            if !active {
                break;
            }
        }
        Ok(self.report)
    }

    fn handle(&mut self, g: usize, env: Envelope<P>) -> Result<(), EngineError> {
        let (pi, index) = (self.slots[g].pi, self.slots[g].index);
        let name = self.names[pi].clone();
        match env {
            Envelope::Event(d) => {
                self.report.events_delivered += 1;
                if self.options.record_log {
                    self.report.log.push(log_line(&name, index, &d));
                }
                let mut em = Emitter::new();
                match &mut self.slots[g].handler {
                    Handler::Bolt(b) => guarded(&name, index, || b.process(d, &mut em))?,
                    Handler::Spout(_) => unreachable!(),
                }
                self.dispatch(g, em, false)
            }
            Envelope::Flush { feedback } => {
                if feedback {
                    return Ok(());
                }
                let slot = &mut self.slots[g];
                slot.forward_seen += 1;
                if slot.forward_seen == slot.forward_expected {
                    let mut em = Emitter::new();
                    match &mut slot.handler {
                        Handler::Bolt(b) => guarded(&name, index, || b.finish(&mut em))?,
                        Handler::Spout(_) => unreachable!(),
                    }
                    self.dispatch(g, em, false)?;
                    self.slots[g].finished = true;
                    self.flush_outputs(g);
                }
                Ok(())
            }
        }
    }

    fn dispatch(&mut self, g: usize, em: Emitter<P>, from_spout: bool) -> Result<(), EngineError> {
        if em.is_empty() {
            return Ok(());
        }
        let (pi, index) = (self.slots[g].pi, self.slots[g].index);
        if self.slots[g].finished {
            return Err(EngineError::EmitAfterFlush {
                pi: self.names[pi].to_string(),
                index,
            });
        }
        let capacity = match (self.options.queue_capacity, self.options.spout_overflow) {
            (QueueCapacity::Bounded(c), SpoutOverflow::Drop) => Some(c),
            _ => None,
        };
        for pending in em.pending {
            let Some(stream_ids) = self.outbound[pi].get(pending.label.as_str()) else {
                continue;
            };
            for &si in stream_ids {
                let s = &self.streams[si];
                let dests = route(
                    pending.key.as_deref(),
                    &s.grouping,
                    self.parallelism[s.destination],
                    &mut self.slots[g].cursors[si],
                )?;
                let seq = self.slots[g].seqs[si];
                self.slots[g].seqs[si] += 1;
                let delivery = Delivery {
                    source: self.names[pi].clone(),
                    source_index: index,
                    stream: s.label.clone(),
                    event: ContentEvent {
                        payload: pending.payload.clone(),
                        key: pending.key.clone(),
                        seq,
                    },
                };
                for d in dests.iter() {
                    self.report.events_emitted += 1;
                    let inbox = &mut self.slots[self.base[s.destination] + d].inbox;
                    if from_spout && capacity.is_some_and(|c| inbox.len() >= c) {
                        self.report.events_dropped_at_spout += 1;
                        continue;
                    }
                    inbox.push_back(Envelope::Event(delivery.clone()));
                }
            }
        }
        Ok(())
    }

    fn flush_outputs(&mut self, g: usize) {
        let pi = self.slots[g].pi;
        for s in self.streams.iter().filter(|s| s.source == pi) {
            for d in 0..self.parallelism[s.destination] {
                self.slots[self.base[s.destination] + d]
                    .inbox
                    .push_back(Envelope::Flush { feedback: s.feedback });
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Concurrent mode
// ---------------------------------------------------------------------------

enum Msg<P> {
    Event(Delivery<P>),
    Flush,
}

struct Counters {
    emitted: AtomicU64,
    delivered: AtomicU64,
    dropped: AtomicU64,
}

/// First failure wins, except that a root-cause failure replaces a
/// disconnect observed as its consequence.
#[derive(Default)]
struct FailureSlot(Mutex<Option<EngineError>>);

impl FailureSlot {
    fn record(&self, e: EngineError) {
        let mut slot = self.0.lock().unwrap_or_else(|p| p.into_inner());
        let replace = match &*slot {
            None => true,
            Some(EngineError::Disconnected { .. }) => !matches!(e, EngineError::Disconnected { .. }),
            Some(_) => false,
        };
        if replace {
            *slot = Some(e);
        }
    }

    fn take(&self) -> Option<EngineError> {
        self.0.lock().unwrap_or_else(|p| p.into_inner()).take()
    }
}

struct OutStream<P> {
    label: Arc<str>,
    grouping: super::routing::Grouping,
    senders: Vec<Sender<Msg<P>>>,
    bounded: bool,
}

/// Routing state owned by one source instance.
struct Outlet<P> {
    name: Arc<str>,
    index: usize,
    streams: Vec<OutStream<P>>,
    by_label: HashMap<Arc<str>, Vec<usize>>,
    cursors: Vec<usize>,
    seqs: Vec<u64>,
}

impl<P: Clone> Outlet<P> {
    fn disconnected(&self) -> EngineError {
        EngineError::Disconnected {
            pi: self.name.to_string(),
            index: self.index,
        }
    }

    fn send(&mut self, em: Emitter<P>, from_spout: bool, counters: &Counters) -> Result<(), EngineError> {
        for pending in em.pending {
            let Some(ids) = self.by_label.get(pending.label.as_str()) else {
                continue;
            };
            for &k in ids {
                let s = &self.streams[k];
                let dests = route(pending.key.as_deref(), &s.grouping, s.senders.len(), &mut self.cursors[k])?;
                let seq = self.seqs[k];
                self.seqs[k] += 1;
                let delivery = Delivery {
                    source: self.name.clone(),
                    source_index: self.index,
                    stream: s.label.clone(),
                    event: ContentEvent {
                        payload: pending.payload.clone(),
                        key: pending.key.clone(),
                        seq,
                    },
                };
                for d in dests.iter() {
                    counters.emitted.fetch_add(1, Ordering::Relaxed);
                    let msg = Msg::Event(delivery.clone());
                    if from_spout && s.bounded {
                        match s.senders[d].try_send(msg) {
                            Ok(()) => {}
                            Err(TrySendError::Full(_)) => {
                                counters.dropped.fetch_add(1, Ordering::Relaxed);
                            }
                            Err(TrySendError::Disconnected(_)) => return Err(self.disconnected()),
                        }
                    } else if s.senders[d].send(msg).is_err() {
                        return Err(self.disconnected());
                    }
                }
            }
        }
        Ok(())
    }

    fn flush(&self) -> Result<(), EngineError> {
        for s in &self.streams {
            for tx in &s.senders {
                tx.send(Msg::Flush).map_err(|_| self.disconnected())?;
            }
        }
        Ok(())
    }
}

fn run_concurrent<P>(topology: Topology<P>, options: RunOptions) -> Result<RunReport, EngineError>
where
    P: Clone + Debug + Send + 'static,
{
    let expected = expected_flushes(&topology);
    let parallelism: Vec<usize> = topology.instances.iter().map(Vec::len).collect();

    // Inboxes per (pi, instance).
    let mut fwd_tx: Vec<Vec<Sender<Msg<P>>>> = Vec::new();
    let mut fb_tx: Vec<Vec<Sender<Msg<P>>>> = Vec::new();
    let mut inboxes: Vec<Vec<Option<(Receiver<Msg<P>>, Receiver<Msg<P>>)>>> = Vec::new();
    for &p in &parallelism {
        let mut f = Vec::new();
        let mut b = Vec::new();
        let mut r = Vec::new();
        for _ in 0..p {
            let (ft, fr) = match options.queue_capacity {
                QueueCapacity::Bounded(c) => bounded(c.max(1)),
                QueueCapacity::Unbounded => unbounded(),
            };
            let (bt, br) = unbounded();
            f.push(ft);
            b.push(bt);
            r.push(Some((fr, br)));
        }
        fwd_tx.push(f);
        fb_tx.push(b);
        inboxes.push(r);
    }

    let bounded_queues = matches!(options.queue_capacity, QueueCapacity::Bounded(_))
        && options.spout_overflow == SpoutOverflow::Drop;
    let mut outlets: Vec<Vec<Outlet<P>>> = Vec::new();
    for (pi, &p) in parallelism.iter().enumerate() {
        let mut v = Vec::new();
        for index in 0..p {
            let mut streams = Vec::new();
            let mut by_label: HashMap<Arc<str>, Vec<usize>> = HashMap::new();
            for s in topology.streams.iter().filter(|s| s.source == pi) {
                let senders = if s.feedback {
                    fb_tx[s.destination].clone()
                } else {
                    fwd_tx[s.destination].clone()
                };
                by_label.entry(s.label.clone()).or_default().push(streams.len());
                streams.push(OutStream {
                    label: s.label.clone(),
                    grouping: s.grouping.clone(),
                    senders,
                    bounded: bounded_queues && !s.feedback,
                });
            }
            let n = streams.len();
            v.push(Outlet {
                name: topology.names[pi].clone(),
                index,
                streams,
                by_label,
                cursors: vec![0; n],
                seqs: vec![0; n],
            });
        }
        outlets.push(v);
    }
    // Only outlets hold senders from here on, so disconnects propagate.
    drop(fwd_tx);
    drop(fb_tx);

    let counters = Counters {
        emitted: AtomicU64::new(0),
        delivered: AtomicU64::new(0),
        dropped: AtomicU64::new(0),
    };
    let failure = FailureSlot::default();
    let abort = AtomicBool::new(false);
    let record_log = options.record_log;

    let mut workers = Vec::new();
    for (pi, handlers) in topology.instances.into_iter().enumerate() {
        let mut pi_outlets = std::mem::take(&mut outlets[pi]).into_iter();
        for (index, handler) in handlers.into_iter().enumerate() {
            let outlet = pi_outlets.next().expect("one outlet per instance");
            let inbox = inboxes[pi][index].take().expect("one inbox per instance");
            workers.push((pi, index, handler, outlet, inbox));
        }
    }

    let logs: Vec<Vec<String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = workers
            .into_iter()
            .map(|(pi, _index, handler, outlet, inbox)| {
                let counters = &counters;
                let failure = &failure;
                let abort = &abort;
                let (fwd_expected, fb_expected) = expected[pi];
                scope.spawn(move || {
                    let mut log = Vec::new();
                    let result = match handler {
                        Handler::Spout(s) => spout_worker(s, outlet, counters, abort),
                        Handler::Bolt(b) => bolt_worker(
                            b,
                            outlet,
                            inbox,
                            (fwd_expected, fb_expected),
                            counters,
                            record_log.then_some(&mut log),
                        ),
                    };
                    if let Err(e) = result {
                        abort.store(true, Ordering::Relaxed);
                        failure.record(e);
                    }
                    log
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_default())
            .collect()
    });

    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(RunReport {
        events_emitted: counters.emitted.load(Ordering::Relaxed),
        events_delivered: counters.delivered.load(Ordering::Relaxed),
        events_dropped_at_spout: counters.dropped.load(Ordering::Relaxed),
        wall_time: 0.0,
        log: logs.into_iter().flatten().collect(),
    })
}

fn spout_worker<P: Clone>(
    mut spout: Box<dyn super::topology::Spout<P>>,
    mut outlet: Outlet<P>,
    counters: &Counters,
    abort: &AtomicBool,
) -> Result<(), EngineError> {
    loop {
        if abort.load(Ordering::Relaxed) {
            return Ok(());
        }
        let mut em = Emitter::new();
        let status = guarded(&outlet.name.clone(), outlet.index, || spout.next(&mut em))?;
        outlet.send(em, true, counters)?;
        if status == SpoutStatus::Exhausted {
            return outlet.flush();
        }
    }
}

fn bolt_worker<P: Clone + Debug>(
    mut bolt: Box<dyn super::topology::Bolt<P>>,
    mut outlet: Outlet<P>,
    (fwd_rx, fb_rx): (Receiver<Msg<P>>, Receiver<Msg<P>>),
    (fwd_expected, fb_expected): (usize, usize),
    counters: &Counters,
    mut log: Option<&mut Vec<String>>,
) -> Result<(), EngineError> {
    let closed: Receiver<Msg<P>> = never();
    let (mut fwd_seen, mut fb_seen) = (0, 0);
    let mut finished = false;
    let name = outlet.name.clone();
    let index = outlet.index;
    while fwd_seen < fwd_expected || fb_seen < fb_expected {
        let fwd = if fwd_seen < fwd_expected { &fwd_rx } else { &closed };
        let fb = if fb_seen < fb_expected { &fb_rx } else { &closed };
        let (msg, feedback) = select! {
            recv(fwd) -> m => (m, false),
            recv(fb) -> m => (m, true),
        };
        let Ok(msg) = msg else {
            return Err(outlet.disconnected());
        };
        match msg {
            Msg::Event(d) => {
                counters.delivered.fetch_add(1, Ordering::Relaxed);
                if let Some(log) = log.as_deref_mut() {
                    log.push(log_line(&name, index, &d));
                }
                let mut em = Emitter::new();
                guarded(&name, index, || bolt.process(d, &mut em))?;
                if finished && !em.is_empty() {
                    return Err(EngineError::EmitAfterFlush {
                        pi: name.to_string(),
                        index,
                    });
                }
                outlet.send(em, false, counters)?;
            }
            Msg::Flush if feedback => fb_seen += 1,
            Msg::Flush => {
                fwd_seen += 1;
                if fwd_seen == fwd_expected {
                    let mut em = Emitter::new();
                    guarded(&name, index, || bolt.finish(&mut em))?;
                    outlet.send(em, false, counters)?;
                    finished = true;
                    outlet.flush()?;
                }
            }
        }
    }
    Ok(())
}

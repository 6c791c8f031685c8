//! Random topologies for engine property checks.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use proptest::prelude::*;
use sentistream::engine::{
    build_topology, key_index, run, Bolt, Delivery, Emitter, Grouping, HandlerRegistry, HandlerResult,
    RunOptions, RunReport, Spout, SpoutStatus, TopologySpec,
};

#[derive(Clone, Debug, PartialEq)]
struct Msg {
    origin: String,
    n: u64,
    key: u8,
}

#[derive(Clone, Debug)]
pub struct Received {
    dst: String,
    dst_index: usize,
    src: String,
    src_index: usize,
    stream: String,
    seq: u64,
    key: Option<Vec<u8>>,
    #[allow(dead_code)]
    msg: Msg,
}

type Log = Arc<Mutex<Vec<Received>>>;

struct CountingSpout {
    name: String,
    left: u64,
    n: u64,
    streams: Vec<String>,
}

impl Spout<Msg> for CountingSpout {
    fn next(&mut self, out: &mut Emitter<Msg>) -> HandlerResult<SpoutStatus> {
        if self.left == 0 {
            return Ok(SpoutStatus::Exhausted);
        }
        self.left -= 1;
        self.n += 1;
        let msg = Msg {
            origin: self.name.clone(),
            n: self.n,
            key: (self.n * 7 % 5) as u8,
        };
        for s in &self.streams {
            out.emit_keyed(s, msg.clone(), vec![msg.key]);
        }
        Ok(SpoutStatus::Active)
    }
}

/// Records every delivery and forwards it on every outbound stream.
struct RelayBolt {
    name: String,
    index: usize,
    streams: Vec<String>,
    log: Log,
}

impl Bolt<Msg> for RelayBolt {
    fn process(&mut self, d: Delivery<Msg>, out: &mut Emitter<Msg>) -> HandlerResult {
        let msg = d.event.payload.clone();
        self.log.lock().unwrap().push(Received {
            dst: self.name.clone(),
            dst_index: self.index,
            src: d.source.to_string(),
            src_index: d.source_index,
            stream: d.stream.to_string(),
            seq: d.event.seq,
            key: d.event.key.clone(),
            msg: msg.clone(),
        });
        for s in &self.streams {
            out.emit_keyed(s, msg.clone(), vec![msg.key]);
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Shape {
    /// (is_spout, parallelism); spouts first.
    pub pis: Vec<(bool, usize)>,
    /// (source, destination, grouping)
    pub edges: Vec<(usize, usize, u8)>,
    pub events: u64,
}

fn grouping(g: u8) -> Grouping {
    match g % 3 {
        0 => Grouping::Shuffle,
        1 => Grouping::All,
        _ => Grouping::key("k"),
    }
}

pub fn shape() -> impl Strategy<Value = Shape> {
    (1usize..=2, 1usize..=4, 0u64..40).prop_flat_map(|(spouts, bolts, events)| {
        let n = spouts + bolts;
        let pars = proptest::collection::vec(1usize..=3, n);
        // every bolt gets one input from an earlier PI plus optional extras
        let primary = proptest::collection::vec((any::<prop::sample::Index>(), 0u8..3), bolts);
        let extra = proptest::collection::vec((0..n, 0..n, 0u8..3), 0..4);
        (pars, primary, extra).prop_map(move |(pars, primary, extra)| {
            let mut edges = Vec::new();
            for (b, (src, g)) in primary.into_iter().enumerate() {
                let dst = spouts + b;
                edges.push((src.index(dst), dst, g));
            }
            for (a, b, g) in extra {
                let (src, dst) = (a.min(b), a.max(b));
                if dst >= spouts && src != dst && !edges.iter().any(|&(s, d, _)| s == src && d == dst) {
                    edges.push((src, dst, g));
                }
            }
            Shape {
                pis: (0..n).map(|i| (i < spouts, pars[i])).collect(),
                edges,
                events,
            }
        })
    })
}

fn name(i: usize) -> String {
    format!("pi{i}")
}

fn stream_label(src: usize, dst: usize) -> String {
    format!("s{src}-{dst}")
}

pub fn execute(shape: &Shape, options: RunOptions) -> (RunReport, Vec<Received>) {
    let log: Log = Arc::new(Mutex::new(Vec::new()));
    let mut spec = TopologySpec::new();
    let mut registry = HandlerRegistry::new();
    for (i, &(is_spout, p)) in shape.pis.iter().enumerate() {
        let outs: Vec<String> = shape
            .edges
            .iter()
            .filter(|e| e.0 == i)
            .map(|&(s, d, _)| stream_label(s, d))
            .collect();
        let nm = name(i);
        if is_spout {
            spec = spec.spout(&nm, p, &nm);
            let events = shape.events;
            registry = registry.spout(&nm, move |ctx| {
                Box::new(CountingSpout {
                    name: format!("{}[{}]", ctx.pi, ctx.index),
                    left: events,
                    n: 0,
                    streams: outs.clone(),
                })
            });
        } else {
            spec = spec.bolt(&nm, p, &nm);
            let log = log.clone();
            registry = registry.bolt(&nm, move |ctx| {
                Box::new(RelayBolt {
                    name: ctx.pi.clone(),
                    index: ctx.index,
                    streams: outs.clone(),
                    log: log.clone(),
                })
            });
        }
    }
    for &(s, d, g) in &shape.edges {
        spec = spec.stream(&stream_label(s, d), &name(s), &name(d), grouping(g));
    }
    let topo = build_topology(spec, &registry).expect("generated topologies are valid");
    let report = run(topo, options).expect("run succeeds");
    let received = log.lock().unwrap().clone();
    (report, received)
}

pub fn check_fifo(received: &[Received]) -> Result<(), TestCaseError> {
    let mut last: HashMap<(String, usize, String, usize, String), u64> = HashMap::new();
    for r in received {
        let channel = (r.src.clone(), r.src_index, r.stream.clone(), r.dst_index, r.dst.clone());
        if let Some(prev) = last.insert(channel, r.seq) {
            prop_assert!(r.seq > prev, "out of order on {}->{}", r.src, r.dst);
        }
    }
    Ok(())
}

pub fn check_routing(shape: &Shape, received: &[Received]) -> Result<(), TestCaseError> {
    for &(s, d, g) in &shape.edges {
        let label = stream_label(s, d);
        let p = shape.pis[d].1;
        let on_stream: Vec<&Received> = received.iter().filter(|r| r.stream == label).collect();
        match grouping(g) {
            Grouping::Shuffle => {
                for src_index in 0..shape.pis[s].1 {
                    let mut counts = vec![0u64; p];
                    for r in on_stream.iter().filter(|r| r.src_index == src_index) {
                        counts[r.dst_index] += 1;
                    }
                    let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                    prop_assert!(hi - lo <= 1, "shuffle imbalance {counts:?} on {label}");
                }
            }
            Grouping::Key { .. } => {
                for r in &on_stream {
                    let key = r.key.as_ref().expect("keyed emission");
                    prop_assert_eq!(r.dst_index, key_index(key, p));
                }
            }
            Grouping::All => {}
        }
    }
    Ok(())
}

/// Events a bolt emitted must all arrive; only spout emissions may vanish.
pub fn check_loss(shape: &Shape, report: &RunReport, received: &[Received]) -> Result<(), TestCaseError> {
    let mut got: HashMap<String, u64> = HashMap::new();
    for r in received {
        *got.entry(r.dst.clone()).or_default() += 1;
    }
    let mut spout_copies = 0u64;
    let mut spout_received = 0u64;
    for &(s, d, g) in &shape.edges {
        let label = stream_label(s, d);
        let fanout = if matches!(grouping(g), Grouping::All) { shape.pis[d].1 as u64 } else { 1 };
        let arrived = received.iter().filter(|r| r.stream == label).count() as u64;
        if shape.pis[s].0 {
            spout_copies += shape.events * shape.pis[s].1 as u64 * fanout;
            spout_received += arrived;
        } else {
            let processed = got.get(&name(s)).copied().unwrap_or(0);
            prop_assert_eq!(arrived, processed * fanout, "bolt stream {} lost events", label);
        }
    }
    prop_assert_eq!(report.events_dropped_at_spout, spout_copies - spout_received);
    prop_assert_eq!(report.events_emitted, report.events_delivered + report.events_dropped_at_spout);
    Ok(())
}


//! Engine adapters for the aggregator and local-statistics state machines.

use crate::engine::{Bolt, Delivery, Emitter, HandlerResult};
use crate::flow::{
    unexpected, AggregatorSink, Payload, PredictionEvent, STREAM_ATTRIBUTE, STREAM_CONTROL, STREAM_LOCAL_RESULT,
    STREAM_MODEL, STREAM_PREDICTIONS,
};

use super::aggregator::ModelAggregator;
use super::events::AggregatorOutput;
use super::local::LocalStatistics;

pub struct AggregatorBolt {
    state: ModelAggregator,
    finished: bool,
    summary_every: Option<u64>,
    seen: u64,
    sink: Option<AggregatorSink>,
}

impl AggregatorBolt {
    pub fn new(state: ModelAggregator) -> Self {
        Self {
            state,
            finished: false,
            summary_every: None,
            seen: 0,
            sink: None,
        }
    }

    pub fn with_summaries(mut self, every: Option<u64>) -> Self {
        self.summary_every = every;
        self
    }

    pub fn with_sink(mut self, sink: Option<AggregatorSink>) -> Self {
        self.sink = sink;
        self
    }

    fn send(out: &mut Emitter<Payload>, outputs: Vec<AggregatorOutput>) {
        for o in outputs {
            match o {
                AggregatorOutput::Attribute(ev) => {
                    let key = ev.routing_key();
                    out.emit_keyed(STREAM_ATTRIBUTE, Payload::Attribute(ev), key);
                }
                AggregatorOutput::Compute(ev) => out.emit(STREAM_CONTROL, Payload::Compute(ev)),
                AggregatorOutput::Drop(ev) => out.emit(STREAM_CONTROL, Payload::DropLeaf(ev)),
            }
        }
    }

    fn publish(&self) {
        if let Some(sink) = &self.sink {
            *sink.lock().unwrap_or_else(|p| p.into_inner()) = Some(self.state.clone());
        }
    }
}

impl Bolt<Payload> for AggregatorBolt {
    fn process(&mut self, input: Delivery<Payload>, out: &mut Emitter<Payload>) -> HandlerResult {
        match input.event.payload {
            Payload::Instance(ev) => {
                let predicted = if ev.instance.label.is_some() {
                    let (predicted, outputs) = self.state.aggregate_instance(&ev.instance)?;
                    Self::send(out, outputs);
                    predicted
                } else {
                    self.state.predict(&ev.instance)
                };
                out.emit(
                    STREAM_PREDICTIONS,
                    Payload::Prediction(PredictionEvent {
                        seq: ev.seq,
                        learner: "vht",
                        predicted,
                        actual: ev.actual,
                    }),
                );
                self.seen += 1;
                if self.summary_every.is_some_and(|n| self.seen.is_multiple_of(n)) {
                    out.emit(STREAM_MODEL, Payload::Model(self.state.summary()));
                }
            }
            Payload::LocalResult(ev) => {
                // Late answers after end of stream cannot change anything
                // downstream any more.
                if self.finished {
                    return Ok(());
                }
                if let Some(outcome) = self.state.receive_local_result(&ev) {
                    Self::send(out, outcome.outputs);
                }
            }
            other => return Err(unexpected("vht-aggregator", &other)),
        }
        if !self.finished {
            for outcome in self.state.tick() {
                Self::send(out, outcome.outputs);
            }
        }
        Ok(())
    }

    fn finish(&mut self, out: &mut Emitter<Payload>) -> HandlerResult {
        out.emit(STREAM_MODEL, Payload::Model(self.state.summary()));
        self.finished = true;
        self.publish();
        Ok(())
    }
}

pub struct LocalStatisticsBolt {
    state: LocalStatistics,
}

impl LocalStatisticsBolt {
    pub fn new(index: usize) -> Self {
        Self {
            state: LocalStatistics::new(index),
        }
    }
}

impl Bolt<Payload> for LocalStatisticsBolt {
    fn process(&mut self, input: Delivery<Payload>, out: &mut Emitter<Payload>) -> HandlerResult {
        match input.event.payload {
            Payload::Attribute(ev) => self.state.local_update(&ev),
            Payload::Compute(ev) => {
                let result = self.state.local_compute(&ev);
                let key = result.routing_key();
                out.emit_keyed(STREAM_LOCAL_RESULT, Payload::LocalResult(result), key);
            }
            Payload::DropLeaf(ev) => self.state.drop_leaf(ev.leaf),
            other => return Err(unexpected("vht-local", &other)),
        }
        Ok(())
    }
}

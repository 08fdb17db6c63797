// SPDX-License-Identifier: Apache-2.0

//! Deterministic discrete-event simulation of the shaper pipeline.
//!
//! Events at the same nanosecond run in class order: period completion,
//! control frame, gate change taking effect, data arrival, transmit
//! complete. Remaining ties go by scheduling order.

mod scenario;
mod trace;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use smallvec::SmallVec;

pub use scenario::*;
pub use trace::*;

use crate::dataplane::{
    identify_in_place, psfp_gate, translate_in_place, EgressPort, EnqueueOutcome, Frame, MplsStack, PsfpVerdict,
    VlanTag,
};
use crate::schedule::NUM_QUEUES;
use crate::timing::{stream_rng, DelaySource, PeriodReference, Stream, Timestamp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Payload {
    Completion { slot: usize },
    Control,
    GateEffective { port: usize },
    Backlog { source: usize },
    TransmitComplete { port: usize },
}

impl Payload {
    fn class(self) -> u8 {
        match self {
            Payload::Completion { .. } => 0,
            Payload::Control => 1,
            Payload::GateEffective { .. } => 2,
            Payload::Backlog { .. } => 3,
            Payload::TransmitComplete { .. } => 4,
        }
    }
}

const DATA_CLASS: u8 = 3;

/// Generates control frames back to back in batches of eight, one per queue,
/// cycling through the ports batch by batch.
#[derive(Clone, Debug)]
pub struct ControlGenerator {
    source: DelaySource,
    ports: usize,
    next_t: u64,
    queue: u8,
    port: usize,
    batch_start: u64,
}

impl ControlGenerator {
    pub fn new(source: DelaySource, ports: usize) -> Self {
        ControlGenerator { source, ports: ports.max(1), next_t: 0, queue: 0, port: 0, batch_start: 0 }
    }

    pub fn peek(&self) -> (u64, usize, u8) {
        (self.next_t, self.port, self.queue)
    }

    pub fn advance(&mut self) {
        let gap = self.source.sample().max(0) as u64;
        self.next_t += gap;
        if self.queue as usize == NUM_QUEUES - 1 {
            self.queue = 0;
            self.port = (self.port + 1) % self.ports;
            // A batch must take time, or the generator would never let the
            // clock move.
            if self.next_t == self.batch_start {
                self.next_t += 1;
            }
            self.batch_start = self.next_t;
        } else {
            self.queue += 1;
        }
    }
}

/// Fire times and target queues of the control frames before `horizon`.
pub fn control_frame_schedule(source: DelaySource, horizon: u64) -> Vec<(u64, u8)> {
    let mut g = ControlGenerator::new(source, 1);
    let mut out = Vec::new();
    while g.peek().0 < horizon {
        let (t, _, q) = g.peek();
        out.push((t, q));
        g.advance();
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub generated: u64,
    pub transmitted: u64,
    pub miss_dropped: u64,
    pub psfp_dropped: u64,
    pub tail_dropped: u64,
    pub residual: u64,
    pub control_frames: u64,
    pub completions: u64,
    pub gate_changes: u64,
}

impl RunStats {
    /// Every generated data frame is accounted for exactly once.
    pub fn is_conserved(&self) -> bool {
        self.generated == self.transmitted + self.miss_dropped + self.psfp_dropped + self.tail_dropped + self.residual
    }
}

struct SourceState {
    spec: SourceSpec,
    rng: ChaCha12Rng,
    k: u64,
    next_t: Option<u64>,
}

impl SourceState {
    fn arrival(&self, k: u64) -> u64 {
        let offset = (k as u128 * 1_000_000_000) / self.spec.rate_pps as u128;
        self.spec.start + offset as u64
    }

    fn schedule(&mut self, horizon: u64) {
        self.next_t = None;
        if self.spec.kind != SourceKind::Constant {
            return;
        }
        let t = self.arrival(self.k);
        let stop = self.spec.stop.unwrap_or(u64::MAX).min(horizon);
        if t < stop {
            self.next_t = Some(t);
        }
    }
}

struct EgressRun {
    priority: u8,
    last: u64,
    count: u64,
}

struct Sim<'a, S: TraceSink> {
    scenario: &'a Scenario,
    compiled: CompiledScenario,
    sink: &'a mut S,
    heap: BinaryHeap<Reverse<(u64, u8, u64, Payload)>>,
    seq: u64,
    refs: Vec<PeriodReference>,
    tg: Vec<DelaySource>,
    dq: Vec<DelaySource>,
    control: ControlGenerator,
    ports: Vec<EgressPort>,
    await_first: Vec<[bool; NUM_QUEUES]>,
    backlog: Vec<[Option<usize>; NUM_QUEUES]>,
    runs: Vec<Option<EgressRun>>,
    sources: Vec<SourceState>,
    next_id: u64,
    stats: RunStats,
}

/// Runs the scenario and collects the whole trace in memory.
pub fn run(scenario: &Scenario) -> Result<Trace, ScenarioError> {
    let mut t = Trace::default();
    run_with_sink(scenario, &mut t)?;
    Ok(t)
}

/// Runs the scenario, streaming trace events to `sink`.
pub fn run_with_sink<S: TraceSink>(scenario: &Scenario, sink: &mut S) -> Result<RunStats, ScenarioError> {
    let compiled = scenario.compile()?;
    let mut sim = Sim::new(scenario, compiled, sink)?;
    sim.run();
    Ok(sim.stats)
}

impl<'a, S: TraceSink> Sim<'a, S> {
    fn new(scenario: &'a Scenario, compiled: CompiledScenario, sink: &'a mut S) -> Result<Self, ScenarioError> {
        let seed = scenario.seed;
        let delay = |model: &crate::timing::DelayModel, which, stream, i| {
            DelaySource::new(model.clone(), stream_rng(seed, stream, i)).map_err(|source| ScenarioError::Delay { which, source })
        };
        let tg = (0..compiled.periods.len())
            .map(|i| delay(&scenario.delays.tg, "tg", Stream::Tg, i as u64))
            .collect::<Result<Vec<_>, _>>()?;
        let dq = (0..compiled.tgcls.len())
            .map(|i| delay(&scenario.delays.queue, "queue", Stream::Queue, i as u64))
            .collect::<Result<Vec<_>, _>>()?;
        let control = ControlGenerator::new(delay(&scenario.delays.control, "control", Stream::Control, 0)?, compiled.tgcls.len());
        let ports: Vec<EgressPort> = compiled
            .tgcls
            .iter()
            .map(|g| EgressPort::new(g.port().expect("transmission list"), scenario.link_rate_bps, scenario.queue_depth))
            .collect();
        let refs = compiled.periods.iter().map(|&h| PeriodReference::new(Timestamp(0), h)).collect();
        let n_ports = ports.len();
        let mut backlog = vec![[None; NUM_QUEUES]; n_ports];
        let sources = scenario
            .sources
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let mut st = SourceState { spec: spec.clone(), rng: stream_rng(seed, Stream::Traffic, i as u64), k: 0, next_t: None };
                st.schedule(scenario.duration);
                st
            })
            .collect();
        let mut sim = Sim {
            scenario,
            sink,
            heap: BinaryHeap::new(),
            seq: 0,
            refs,
            tg,
            dq,
            control,
            await_first: vec![[false; NUM_QUEUES]; n_ports],
            backlog: Vec::new(),
            runs: (0..n_ports).map(|_| None).collect(),
            ports,
            sources,
            next_id: 0,
            stats: RunStats::default(),
            compiled,
        };
        for (i, spec) in scenario.sources.iter().enumerate() {
            if let (SourceKind::Backlogged { .. }, PriorityDist::Fixed(p)) = (spec.kind, spec.priority) {
                let port = sim.port_index(spec.port);
                backlog[port][p as usize] = Some(i);
                sim.push(spec.start, Payload::Backlog { source: i });
            }
        }
        sim.backlog = backlog;
        for slot in 0..sim.refs.len() {
            sim.push(0, Payload::Completion { slot });
        }
        sim.push(0, Payload::Control);
        Ok(sim)
    }

    fn port_index(&self, port: u16) -> usize {
        self.ports.iter().position(|p| p.port_id == port).expect("validated port")
    }

    fn push(&mut self, t: u64, p: Payload) {
        self.seq += 1;
        self.heap.push(Reverse((t, p.class(), self.seq, p)));
    }

    fn next_source(&self) -> Option<(u64, usize)> {
        let mut best: Option<(u64, usize)> = None;
        for (i, s) in self.sources.iter().enumerate() {
            if let Some(t) = s.next_t {
                if best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, i));
                }
            }
        }
        best
    }

    fn run(&mut self) {
        let end = self.scenario.duration;
        loop {
            let src = self.next_source();
            let top = self.heap.peek().map(|Reverse((t, c, _, _))| (*t, *c));
            let take_source = match (src, top) {
                (Some((st, _)), Some((ht, hc))) => (st, DATA_CLASS) < (ht, hc),
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_source {
                let (t, i) = src.expect("source chosen");
                if t >= end {
                    break;
                }
                self.data_arrival(t, i);
            } else {
                let Reverse((t, _, _, p)) = self.heap.pop().expect("event chosen");
                if t >= end {
                    break;
                }
                self.dispatch(t, p);
            }
        }
        self.finish(end);
    }

    fn dispatch(&mut self, t: u64, p: Payload) {
        match p {
            Payload::Completion { slot } => self.completion(t, slot),
            Payload::Control => self.control_frame(t),
            Payload::GateEffective { port } => {
                self.apply_gates(t, port);
                self.try_transmit(t, port);
            }
            Payload::Backlog { source } => self.fill_backlog(t, source),
            Payload::TransmitComplete { port } => self.transmit_complete(t, port),
        }
    }

    fn completion(&mut self, t: u64, slot: usize) {
        self.stats.completions += 1;
        self.refs[slot].complete(Timestamp(t));
        let h = self.refs[slot].period;
        self.sink.record(TraceEvent::new(t, EventClass::Completion).port(slot as u16).aux(h as i64));
        let next = (h as i64 + self.tg[slot].sample()).max(1) as u64;
        self.push(t + next, Payload::Completion { slot });
    }

    fn control_frame(&mut self, t: u64) {
        let (_, pidx, q) = self.control.peek();
        self.control.advance();
        let next = self.control.peek().0;
        self.push(next, Payload::Control);
        self.stats.control_frames += 1;

        let port_id = self.ports[pidx].port_id;
        let slot = self.compiled.tgcl_slot[pidx];
        let reference = self.refs[slot];
        let rel = t - reference.last_completion.0;
        let id = self.fresh_id();
        let ctrl = Frame::control(id, t, port_id, q);
        if self.scenario.trace.control_frames {
            let clamped = rel.min(reference.period - 1);
            self.sink.record(TraceEvent::new(t, EventClass::Control).port(port_id).queue(q).frame(id).aux(clamped as i64));
        }
        let change = self.ports[pidx].submit_afc(&ctrl, &self.compiled.tgcl_mat, rel, reference.period, t, &mut self.dq[pidx]);
        if let Some(c) = change {
            let class = if c.open { EventClass::WriteOpen } else { EventClass::WriteClose };
            self.sink.record(TraceEvent::new(t, class).port(port_id).queue(q).aux((c.effective - t) as i64));
            self.push(c.effective, Payload::GateEffective { port: pidx });
        }
    }

    fn apply_gates(&mut self, t: u64, pidx: usize) {
        let applied = self.ports[pidx].apply_pending(t);
        for c in applied {
            self.stats.gate_changes += 1;
            let depth = self.ports[pidx].depth(c.queue);
            let class = if c.open { EventClass::GateOpen } else { EventClass::GateClose };
            self.sink.record(TraceEvent::new(t, class).port(c.port).queue(c.queue).aux(depth as i64));
            self.await_first[pidx][c.queue as usize] = c.open && depth > 0;
        }
    }

    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn make_frame(&mut self, t: u64, i: usize) -> Frame {
        let id = self.fresh_id();
        let s = &mut self.sources[i];
        let prio = match s.spec.priority {
            PriorityDist::Fixed(p) => p,
            PriorityDist::Uniform => s.rng.gen_range(0..NUM_QUEUES as u8),
        };
        let mut f = Frame::data(id, t, s.spec.size);
        f.eth_dst = s.spec.eth_dst;
        f.ipv4 = s.spec.ipv4;
        f.egress_port = s.spec.port;
        match &s.spec.mpls {
            Some(m) => {
                f.mpls = Some(MplsStack {
                    f_labels: SmallVec::from_slice(&m.f_labels),
                    s_label: m.s_label,
                    tc: prio,
                    dcw_seq: s.k as u32,
                });
            }
            None => f.vlan = Some(VlanTag { id: s.spec.vlan_id, pcp: prio }),
        }
        f
    }

    fn data_arrival(&mut self, t: u64, i: usize) {
        let mut frame = self.make_frame(t, i);
        let s = &mut self.sources[i];
        s.k += 1;
        s.schedule(self.scenario.duration);
        self.stats.generated += 1;
        let frame_events = self.scenario.trace.frame_events;
        if frame_events {
            self.sink.record(
                TraceEvent::new(t, EventClass::Arrival).port(frame.egress_port).priority(frame.priority()).frame(frame.id),
            );
        }
        if !translate_in_place(&mut frame, &self.compiled.stream_table) {
            self.stats.miss_dropped += 1;
            if frame_events {
                self.sink.record(TraceEvent::new(t, EventClass::MissDrop).port(frame.egress_port).frame(frame.id));
            }
            return;
        }
        identify_in_place(&mut frame, &self.compiled.stream_table);
        let stream = frame.stream;
        if let Some(gid) = stream.and_then(|s| s.sgcl_id) {
            let g = self.compiled.sgcl_index(gid).expect("validated gate id");
            let reference = self.refs[self.compiled.sgcl_slot[g]];
            let rel = t - reference.last_completion.0;
            if psfp_gate(&self.compiled.sgcls[g], rel) == PsfpVerdict::Drop {
                self.stats.psfp_dropped += 1;
                if frame_events {
                    self.sink.record(
                        TraceEvent::new(t, EventClass::PsfpDrop)
                            .port(frame.egress_port)
                            .priority(frame.priority())
                            .stream(stream.map(|s| s.handle))
                            .frame(frame.id),
                    );
                }
                return;
            }
        }
        let pidx = self.port_index(frame.egress_port);
        self.enqueue(t, pidx, frame);
    }

    fn enqueue(&mut self, t: u64, pidx: usize, frame: Frame) {
        let ev = TraceEvent::new(t, EventClass::Enqueue)
            .port(frame.egress_port)
            .priority(frame.priority())
            .stream(frame.stream.map(|s| s.handle))
            .frame(frame.id);
        match self.ports[pidx].enqueue(frame) {
            EnqueueOutcome::Queued => {
                if self.scenario.trace.frame_events {
                    self.sink.record(ev);
                }
                self.try_transmit(t, pidx);
            }
            EnqueueOutcome::TailDropped => {
                self.stats.tail_dropped += 1;
                if self.scenario.trace.frame_events {
                    self.sink.record(TraceEvent { event: EventClass::TailDrop, ..ev });
                }
            }
        }
    }

    fn fill_backlog(&mut self, t: u64, i: usize) {
        let SourceKind::Backlogged { depth } = self.sources[i].spec.kind else { return };
        let pidx = self.port_index(self.sources[i].spec.port);
        for _ in 0..depth {
            let f = self.make_frame(t, i);
            self.sources[i].k += 1;
            self.stats.generated += 1;
            self.enqueue(t, pidx, f);
        }
    }

    fn try_transmit(&mut self, t: u64, pidx: usize) {
        if self.ports[pidx].is_busy() {
            return;
        }
        self.apply_gates(t, pidx);
        let Some(tr) = self.ports[pidx].transmit_step(t) else { return };
        let (q, done, deq, id, prio, stream) =
            (tr.queue, tr.t_done(), tr.t_deq(), tr.frame.id, tr.frame.priority(), tr.frame.stream.map(|s| s.handle));
        let port_id = self.ports[pidx].port_id;
        if self.scenario.trace.frame_events || self.await_first[pidx][q as usize] {
            self.sink.record(TraceEvent::new(deq, EventClass::Dequeue).port(port_id).queue(q).priority(prio).stream(stream).frame(id));
        }
        self.await_first[pidx][q as usize] = false;
        self.push(done, Payload::TransmitComplete { port: pidx });
        if let Some(src) = self.backlog[pidx][q as usize] {
            let f = self.make_frame(t, src);
            self.sources[src].k += 1;
            self.stats.generated += 1;
            self.enqueue(t, pidx, f);
        }
    }

    fn transmit_complete(&mut self, t: u64, pidx: usize) {
        let Some(tr) = self.ports[pidx].complete() else { return };
        self.stats.transmitted += 1;
        let port_id = self.ports[pidx].port_id;
        let prio = tr.frame.priority();
        let ev = TraceEvent::new(t, EventClass::Egress)
            .port(port_id)
            .queue(tr.queue)
            .priority(prio)
            .stream(tr.frame.stream.map(|s| s.handle))
            .frame(tr.frame.id)
            .aux(tr.t_deq() as i64);
        match self.scenario.trace.egress {
            EgressMode::Frames => self.sink.record(ev),
            EgressMode::Runs => match &mut self.runs[pidx] {
                Some(r) if r.priority == prio => {
                    r.last = t;
                    r.count += 1;
                }
                slot => {
                    if let Some(r) = slot.take() {
                        self.sink.record(run_end(t, port_id, &r));
                    }
                    *slot = Some(EgressRun { priority: prio, last: t, count: 1 });
                    self.sink.record(ev);
                }
            },
        }
        self.try_transmit(t, pidx);
    }

    fn finish(&mut self, end: u64) {
        for pidx in 0..self.ports.len() {
            let port_id = self.ports[pidx].port_id;
            if let Some(r) = self.runs[pidx].take() {
                self.sink.record(run_end(end, port_id, &r));
            }
            let mut depth = [0u64; NUM_QUEUES];
            if let Some(tr) = self.ports[pidx].complete() {
                depth[tr.queue as usize] += 1;
            }
            for q in 0..NUM_QUEUES as u8 {
                depth[q as usize] += self.ports[pidx].depth(q) as u64;
            }
            for (q, &d) in depth.iter().enumerate() {
                self.stats.residual += d;
                if d > 0 {
                    self.sink.record(TraceEvent::new(end, EventClass::Residual).port(port_id).queue(q as u8).aux(d as i64));
                }
            }
        }
    }
}

fn run_end(t: u64, port: u16, r: &EgressRun) -> TraceEvent {
    TraceEvent::new(t, EventClass::RunEnd).port(port).priority(r.priority).frame(r.count).aux(r.last as i64)
}

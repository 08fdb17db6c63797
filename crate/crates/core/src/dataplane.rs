// SPDX-License-Identifier: Apache-2.0

//! Bridge pipeline stages: DetNet/TSN translation, stream identification,
//! stream gating at ingress, and gated egress queues driven by control frames.

use std::collections::VecDeque;

use smallvec::SmallVec;

use crate::schedule::{Gcl, GateVector, NUM_QUEUES};
use crate::tcam::{ternary_match, Action, CapacityError, MatTable, TableKind, TernaryKey, STREAM_CAPACITY};
use crate::timing::DelaySource;

pub const MIN_FRAME_SIZE: u32 = 64;
pub const CONTROL_FRAME_SIZE: u32 = 64;
/// Preamble, start delimiter and inter-frame gap.
pub const LINK_OVERHEAD_BYTES: u32 = 20;
pub const DEFAULT_QUEUE_DEPTH: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Data,
    PeriodCompletion,
    TasControl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VlanTag {
    pub id: u16,
    pub pcp: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MplsStack {
    pub f_labels: SmallVec<[u32; 2]>,
    pub s_label: u32,
    /// Traffic class bits of the S-Label.
    pub tc: u8,
    /// Sequence number of the DetNet control word.
    pub dcw_seq: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ipv4Addrs {
    pub src: u32,
    pub dst: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ControlMeta {
    pub target_port: u16,
    pub target_queue: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamInfo {
    pub handle: u32,
    pub sgcl_id: Option<u32>,
    pub priority: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Frame {
    pub id: u64,
    pub kind: FrameKind,
    pub t_gen: u64,
    pub t_ingress: u64,
    pub size: u32,
    pub eth_dst: u64,
    pub vlan: Option<VlanTag>,
    pub mpls: Option<MplsStack>,
    pub ipv4: Option<Ipv4Addrs>,
    pub control_meta: Option<ControlMeta>,
    pub stream: Option<StreamInfo>,
    /// Egress port the frame is forwarded to.
    pub egress_port: u16,
}

impl Frame {
    pub fn data(id: u64, t: u64, size: u32) -> Self {
        Frame {
            id,
            kind: FrameKind::Data,
            t_gen: t,
            t_ingress: t,
            size,
            eth_dst: 0,
            vlan: None,
            mpls: None,
            ipv4: None,
            control_meta: None,
            stream: None,
            egress_port: 0,
        }
    }

    pub fn control(id: u64, t: u64, target_port: u16, target_queue: u8) -> Self {
        Frame {
            kind: FrameKind::TasControl,
            control_meta: Some(ControlMeta { target_port, target_queue }),
            ..Frame::data(id, t, CONTROL_FRAME_SIZE)
        }
    }

    pub fn period_completion(id: u64, t: u64) -> Self {
        Frame { kind: FrameKind::PeriodCompletion, ..Frame::data(id, t, CONTROL_FRAME_SIZE) }
    }

    /// Queue the frame is shaped in: the identified stream's priority, else
    /// the VLAN PCP, else the MPLS traffic class, else 0.
    pub fn priority(&self) -> u8 {
        if let Some(s) = self.stream {
            return s.priority;
        }
        if let Some(v) = self.vlan {
            return v.pcp;
        }
        self.mpls.as_ref().map_or(0, |m| m.tc)
    }

    /// Structural invariants of a frame record.
    pub fn check(&self) -> Result<(), String> {
        if self.size < MIN_FRAME_SIZE {
            return Err(format!("frame {} is {} B, below the 64 B minimum", self.id, self.size));
        }
        if self.kind == FrameKind::TasControl && (self.control_meta.is_none() || self.size != CONTROL_FRAME_SIZE) {
            return Err(format!("control frame {} needs control metadata and 64 B size", self.id));
        }
        if let Some(v) = self.vlan {
            if v.id > 4095 || v.pcp > 7 {
                return Err(format!("frame {} carries an out-of-range VLAN tag", self.id));
            }
        }
        if let Some(m) = &self.mpls {
            if m.s_label >= 1 << 20 || m.f_labels.iter().any(|&l| l >= 1 << 20) {
                return Err(format!("frame {} carries an MPLS label wider than 20 bits", self.id));
            }
        }
        Ok(())
    }
}

/// Value/mask match on one header field; a zero mask is a wildcard that also
/// matches frames lacking the field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct FieldMatch {
    pub value: u64,
    pub mask: u64,
}

impl FieldMatch {
    pub const ANY: FieldMatch = FieldMatch { value: 0, mask: 0 };

    pub fn exact(value: u64) -> Self {
        FieldMatch { value, mask: u64::MAX }
    }

    pub fn matches(&self, field: Option<u64>) -> bool {
        if self.mask == 0 {
            return true;
        }
        field.is_some_and(|f| f & self.mask == self.value & self.mask)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub s_label: FieldMatch,
    pub eth_dst: FieldMatch,
    pub vlan_id: FieldMatch,
    pub ipv4_src: FieldMatch,
    pub ipv4_dst: FieldMatch,
}

impl StreamKey {
    pub fn matches(&self, f: &Frame) -> bool {
        self.s_label.matches(f.mpls.as_ref().map(|m| m.s_label as u64))
            && self.eth_dst.matches(Some(f.eth_dst))
            && self.vlan_id.matches(f.vlan.map(|v| v.id as u64))
            && self.ipv4_src.matches(f.ipv4.map(|a| a.src as u64))
            && self.ipv4_dst.matches(f.ipv4.map(|a| a.dst as u64))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamAction {
    /// Push a VLAN tag; `priority: None` keeps the MPLS traffic class.
    Translate { vlan_id: u16, priority: Option<u8> },
    /// Attach a stream handle; `priority: None` keeps the frame's priority.
    Identify { handle: u32, sgcl_id: Option<u32>, priority: Option<u8> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamTableEntry {
    pub key: StreamKey,
    pub action: StreamAction,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MissPolicy {
    /// Tag with VLAN 0, PCP 0 and forward as best effort.
    #[default]
    BestEffort,
    Drop,
}

/// Shared translation and identification table, first match wins.
#[derive(Clone, Debug)]
pub struct StreamTable {
    entries: Vec<StreamTableEntry>,
    capacity: usize,
    pub miss_policy: MissPolicy,
}

impl Default for StreamTable {
    fn default() -> Self {
        StreamTable::with_capacity(STREAM_CAPACITY)
    }
}

impl StreamTable {
    pub fn with_capacity(capacity: usize) -> Self {
        StreamTable { entries: Vec::new(), capacity, miss_policy: MissPolicy::BestEffort }
    }

    pub fn insert(&mut self, entry: StreamTableEntry) -> Result<(), CapacityError> {
        if self.entries.len() >= self.capacity {
            return Err(CapacityError { table: TableKind::Stream, count: self.entries.len() + 1, capacity: self.capacity });
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[StreamTableEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn find_translation(&self, f: &Frame) -> Option<(u16, Option<u8>)> {
        self.entries.iter().find_map(|e| match e.action {
            StreamAction::Translate { vlan_id, priority } if e.key.matches(f) => Some((vlan_id, priority)),
            _ => None,
        })
    }

    fn find_identity(&self, f: &Frame) -> Option<(u32, Option<u32>, Option<u8>)> {
        self.entries.iter().find_map(|e| match e.action {
            StreamAction::Identify { handle, sgcl_id, priority } if e.key.matches(f) => Some((handle, sgcl_id, priority)),
            _ => None,
        })
    }
}

/// Pushes a VLAN tag derived from the S-Label. Frames without MPLS, or
/// already tagged, pass unchanged. `None` means dropped by the miss policy.
pub fn translate_detnet_to_tsn(frame: &Frame, table: &StreamTable) -> Option<Frame> {
    let mut out = frame.clone();
    translate_in_place(&mut out, table).then_some(out)
}

/// In-place form of [`translate_detnet_to_tsn`]; false means dropped.
pub fn translate_in_place(frame: &mut Frame, table: &StreamTable) -> bool {
    let Some(mpls) = &frame.mpls else {
        return true;
    };
    if frame.vlan.is_some() {
        return true;
    }
    let vlan = match table.find_translation(frame) {
        Some((id, prio)) => VlanTag { id, pcp: prio.unwrap_or(mpls.tc) },
        None => match table.miss_policy {
            MissPolicy::BestEffort => VlanTag { id: 0, pcp: 0 },
            MissPolicy::Drop => return false,
        },
    };
    frame.vlan = Some(vlan);
    true
}

/// Removes the VLAN tag again on the way out of the TSN domain.
pub fn translate_tsn_to_detnet(frame: &Frame) -> Frame {
    if frame.mpls.is_none() {
        return frame.clone();
    }
    Frame { vlan: None, ..frame.clone() }
}

/// Attaches stream handle, sGCL and priority on a match; on a miss the frame
/// stays best effort with no stream.
pub fn identify_stream(frame: &Frame, table: &StreamTable) -> Frame {
    let mut out = frame.clone();
    identify_in_place(&mut out, table);
    out
}

pub fn identify_in_place(frame: &mut Frame, table: &StreamTable) {
    frame.stream = table.find_identity(frame).map(|(handle, sgcl_id, prio)| StreamInfo {
        handle,
        sgcl_id,
        priority: prio.unwrap_or_else(|| frame.priority()),
    });
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PsfpVerdict {
    Pass,
    Drop,
}

/// Stream gate decision at `rel_time`, clamped like every list lookup.
pub fn psfp_gate(sgcl: &Gcl, rel_time: u64) -> PsfpVerdict {
    match sgcl.entry_at(rel_time).and_then(|(_, e)| e.stream_open()) {
        Some(true) => PsfpVerdict::Pass,
        _ => PsfpVerdict::Drop,
    }
}

/// Same decision through a compiled sGCL table.
pub fn psfp_gate_mat(mat: &MatTable, gate_id: u32, rel_time: u64, period: u64) -> PsfpVerdict {
    let key = TernaryKey::sgcl(rel_time.min(period.saturating_sub(1)), gate_id);
    match ternary_match(mat, &key).map(|e| e.action) {
        Some(Action::Pass) => PsfpVerdict::Pass,
        _ => PsfpVerdict::Drop,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GateChange {
    pub effective: u64,
    pub written: u64,
    pub port: u16,
    pub queue: u8,
    pub open: bool,
}

/// Gate state a control frame asks for, looked up at the clamped relative
/// time. `None` for non-control frames or when nothing matches.
pub fn afc_target(ctrl: &Frame, mat: &MatTable, rel_time: u64, period: u64) -> Option<(u16, u8, bool)> {
    let meta = ctrl.control_meta.filter(|_| ctrl.kind == FrameKind::TasControl)?;
    let t = rel_time.min(period.saturating_sub(1));
    let key = TernaryKey::tgcl(t, meta.target_port, meta.target_queue);
    match ternary_match(mat, &key)?.action {
        Action::Open => Some((meta.target_port, meta.target_queue, true)),
        Action::Close => Some((meta.target_port, meta.target_queue, false)),
        Action::Pass | Action::Drop => None,
    }
}

/// Single control frame to gate change, delayed by one queue-delay draw.
pub fn apply_afc(ctrl: &Frame, mat: &MatTable, rel_time: u64, period: u64, now: u64, dq: &mut DelaySource) -> Option<GateChange> {
    let (port, queue, open) = afc_target(ctrl, mat, rel_time, period)?;
    let d = dq.sample().max(0) as u64;
    Some(GateChange { effective: now + d, written: now, port, queue, open })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnqueueOutcome {
    Queued,
    TailDropped,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub frame: Frame,
    pub queue: u8,
    pub start_ps: u64,
    pub done_ps: u64,
}

impl Transmission {
    pub fn t_deq(&self) -> u64 {
        self.start_ps / 1000
    }

    pub fn t_done(&self) -> u64 {
        self.done_ps / 1000
    }
}

/// Serialization time in picoseconds, rounded up.
pub fn serialization_ps(size: u32, rate_bps: u64) -> u64 {
    let bits = (size as u128 + LINK_OVERHEAD_BYTES as u128) * 8;
    (bits * 1_000_000_000_000).div_ceil(rate_bps as u128) as u64
}

/// Eight gated FIFO queues in front of one link.
#[derive(Clone, Debug)]
pub struct EgressPort {
    pub port_id: u16,
    pub link_rate_bps: u64,
    pub depth_limit: usize,
    queues: [VecDeque<Frame>; NUM_QUEUES],
    gates: GateVector,
    written: GateVector,
    pending: VecDeque<GateChange>,
    last_effective: u64,
    free_at_ps: u64,
    in_flight: Option<Transmission>,
}

impl EgressPort {
    pub fn new(port_id: u16, link_rate_bps: u64, depth_limit: usize) -> Self {
        EgressPort {
            port_id,
            link_rate_bps,
            depth_limit,
            queues: Default::default(),
            gates: GateVector::ALL_CLOSED,
            written: GateVector::ALL_CLOSED,
            pending: VecDeque::new(),
            last_effective: 0,
            free_at_ps: 0,
            in_flight: None,
        }
    }

    pub fn gates(&self) -> GateVector {
        self.gates
    }

    pub fn depth(&self, q: u8) -> usize {
        self.queues[q as usize].len()
    }

    pub fn total_depth(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn queue(&self, q: u8) -> &VecDeque<Frame> {
        &self.queues[q as usize]
    }

    pub fn pending(&self) -> impl Iterator<Item = &GateChange> {
        self.pending.iter()
    }

    pub fn is_busy(&self) -> bool {
        self.in_flight.is_some()
    }

    pub fn in_flight(&self) -> Option<&Transmission> {
        self.in_flight.as_ref()
    }

    /// Buffers the frame in the queue of its priority whatever the gate
    /// state; only a full queue drops.
    pub fn enqueue(&mut self, frame: Frame) -> EnqueueOutcome {
        let q = &mut self.queues[frame.priority() as usize & 7];
        if q.len() >= self.depth_limit {
            return EnqueueOutcome::TailDropped;
        }
        q.push_back(frame);
        EnqueueOutcome::Queued
    }

    /// Feeds a control frame into the gate update path. Writes that repeat
    /// the last written state of the queue are no-ops. Updates on one port
    /// take effect in write order, so a change never overtakes an earlier one.
    pub fn submit_afc(&mut self, ctrl: &Frame, mat: &MatTable, rel_time: u64, period: u64, now: u64, dq: &mut DelaySource) -> Option<GateChange> {
        let (port, queue, open) = afc_target(ctrl, mat, rel_time, period)?;
        if port != self.port_id || self.written.is_open(queue) == open {
            return None;
        }
        let d = dq.sample().max(0) as u64;
        let effective = (now + d).max(self.last_effective);
        self.last_effective = effective;
        self.written = self.written.with(queue, open);
        let change = GateChange { effective, written: now, port, queue, open };
        self.pending.push_back(change);
        Some(change)
    }

    /// Applies every pending change effective at or before `now`.
    pub fn apply_pending(&mut self, now: u64) -> SmallVec<[GateChange; 2]> {
        let mut applied = SmallVec::new();
        while let Some(c) = self.pending.front().copied() {
            if c.effective > now {
                break;
            }
            self.pending.pop_front();
            self.gates = self.gates.with(c.queue, c.open);
            applied.push(c);
        }
        applied
    }

    /// Starts the next frame if the link is idle: pending changes first, then
    /// the highest open non-empty queue. The frame stays in flight until
    /// [`EgressPort::complete`].
    pub fn transmit_step(&mut self, now: u64) -> Option<&Transmission> {
        if self.in_flight.is_some() {
            return None;
        }
        self.apply_pending(now);
        let q = (0..NUM_QUEUES as u8).rev().find(|&q| self.gates.is_open(q) && !self.queues[q as usize].is_empty())?;
        let frame = self.queues[q as usize].pop_front().expect("non-empty queue");
        let start_ps = (now * 1000).max(self.free_at_ps);
        let done_ps = start_ps + serialization_ps(frame.size, self.link_rate_bps);
        self.free_at_ps = done_ps;
        self.in_flight = Some(Transmission { frame, queue: q, start_ps, done_ps });
        self.in_flight.as_ref()
    }

    /// Finishes the frame on the wire.
    pub fn complete(&mut self) -> Option<Transmission> {
        self.in_flight.take()
    }

    /// Frames still buffered, queue by queue.
    pub fn drain(&mut self) -> Vec<(u8, Frame)> {
        let mut out = Vec::new();
        for (q, queue) in self.queues.iter_mut().enumerate() {
            out.extend(queue.drain(..).map(|f| (q as u8, f)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{GclEntry, GclKind};
    use crate::tcam::compile_tgcl;
    use crate::timing::{stream_rng, DelayModel, Stream};

    fn detnet(s_label: u32, tc: u8) -> Frame {
        let mut f = Frame::data(1, 0, 64);
        f.eth_dst = 0x0a;
        f.mpls = Some(MplsStack { f_labels: SmallVec::from_slice(&[16, 17]), s_label, tc, dcw_seq: 5 });
        f
    }

    fn table() -> StreamTable {
        let mut t = StreamTable::default();
        t.insert(StreamTableEntry {
            key: StreamKey { s_label: FieldMatch::exact(100), ..Default::default() },
            action: StreamAction::Translate { vlan_id: 10, priority: Some(7) },
        })
        .unwrap();
        t.insert(StreamTableEntry {
            key: StreamKey { eth_dst: FieldMatch::exact(0x0a), vlan_id: FieldMatch::exact(10), ..Default::default() },
            action: StreamAction::Identify { handle: 5, sgcl_id: Some(1), priority: None },
        })
        .unwrap();
        t
    }

    fn dq(v: i64) -> DelaySource {
        DelaySource::new(DelayModel::Constant(v), stream_rng(0, Stream::Queue, 0)).unwrap()
    }

    #[test]
    fn translation_examples() {
        let t = table();
        let f = detnet(100, 3);
        let g = translate_detnet_to_tsn(&f, &t).unwrap();
        assert_eq!(g.vlan, Some(VlanTag { id: 10, pcp: 7 }));
        assert_eq!(g.mpls, f.mpls);
        assert_eq!(translate_tsn_to_detnet(&g), f);
        let miss = translate_detnet_to_tsn(&detnet(999, 3), &t).unwrap();
        assert_eq!(miss.vlan, Some(VlanTag { id: 0, pcp: 0 }));
        assert_eq!(miss.priority(), 0);
        let plain = Frame::data(2, 0, 64);
        assert_eq!(translate_detnet_to_tsn(&plain, &t).unwrap(), plain);
        assert_eq!(translate_tsn_to_detnet(&plain), plain);
        let mut dropping = t.clone();
        dropping.miss_policy = MissPolicy::Drop;
        assert!(translate_detnet_to_tsn(&detnet(999, 3), &dropping).is_none());
    }

    #[test]
    fn identification_examples() {
        let t = table();
        let g = identify_stream(&translate_detnet_to_tsn(&detnet(100, 3), &t).unwrap(), &t);
        assert_eq!(g.stream, Some(StreamInfo { handle: 5, sgcl_id: Some(1), priority: 7 }));
        let mut wild = StreamTable::default();
        wild.insert(StreamTableEntry {
            key: StreamKey { s_label: FieldMatch::exact(100), ..Default::default() },
            action: StreamAction::Identify { handle: 9, sgcl_id: None, priority: Some(2) },
        })
        .unwrap();
        let mut f = detnet(100, 3);
        f.eth_dst = 0xdead;
        assert_eq!(identify_stream(&f, &wild).stream.unwrap().handle, 9);
        let miss = identify_stream(&detnet(7, 3), &t);
        assert!(miss.stream.is_none());
        assert_eq!(miss.priority(), 3);
    }

    #[test]
    fn stream_table_capacity() {
        let mut t = StreamTable::default();
        let e = StreamTableEntry { key: StreamKey::default(), action: StreamAction::Translate { vlan_id: 1, priority: None } };
        for _ in 0..STREAM_CAPACITY {
            t.insert(e).unwrap();
        }
        let err = t.insert(e).unwrap_err();
        assert_eq!((err.table, err.excess()), (TableKind::Stream, 1));
    }

    #[test]
    fn psfp_boundaries() {
        let g = Gcl::new(GclKind::Stream { gate_id: 1 }, vec![GclEntry::stream(100, true), GclEntry::stream(100, false)]);
        assert_eq!(psfp_gate(&g, 50), PsfpVerdict::Pass);
        assert_eq!(psfp_gate(&g, 150), PsfpVerdict::Drop);
        assert_eq!(psfp_gate(&g, 100), PsfpVerdict::Drop);
        assert_eq!(psfp_gate(&g, 99), PsfpVerdict::Pass);
        assert_eq!(psfp_gate(&g, 10_000), PsfpVerdict::Drop);
    }

    #[test]
    fn afc_examples() {
        let g = Gcl::rotation(0, 8, 50_000);
        let mat = compile_tgcl(&g, 48).unwrap();
        let c = Frame::control(1, 0, 0, 3);
        assert_eq!(apply_afc(&c, &mat, 150_000, g.period(), 1000, &mut dq(14)).unwrap(), GateChange {
            effective: 1014,
            written: 1000,
            port: 0,
            queue: 3,
            open: true
        });
        assert_eq!(apply_afc(&c, &mat, 0, g.period(), 1000, &mut dq(0)).unwrap().effective, 1000);
        let stray = Frame::control(2, 0, 4, 3);
        assert!(apply_afc(&stray, &mat, 0, g.period(), 0, &mut dq(0)).is_none());
    }

    #[test]
    fn redundant_writes_are_ignored_and_changes_stay_in_order() {
        let g = Gcl::rotation(0, 8, 100);
        let mat = compile_tgcl(&g, 48).unwrap();
        let mut p = EgressPort::new(0, 400_000_000_000, 16);
        let mut src = DelaySource::new(DelayModel::Scripted(vec![50, 1]), stream_rng(0, Stream::Queue, 0)).unwrap();
        let open0 = p.submit_afc(&Frame::control(1, 0, 0, 0), &mat, 0, 800, 0, &mut src).unwrap();
        assert_eq!(open0.effective, 50);
        assert!(p.submit_afc(&Frame::control(2, 0, 0, 0), &mat, 10, 800, 10, &mut src).is_none());
        let open1 = p.submit_afc(&Frame::control(3, 0, 0, 1), &mat, 100, 800, 20, &mut src).unwrap();
        assert_eq!(open1.effective, 50);
        let close0 = p.submit_afc(&Frame::control(4, 0, 0, 0), &mat, 100, 800, 30, &mut src).unwrap();
        assert_eq!(close0.effective, 80);
        assert_eq!(p.apply_pending(49).len(), 0);
        assert_eq!(p.apply_pending(50).len(), 2);
        assert_eq!(p.gates(), GateVector::from_bits(0b11));
        assert_eq!(p.apply_pending(80).len(), 1);
        assert_eq!(p.gates(), GateVector::single(1));
    }

    #[test]
    fn strict_priority_and_serialization() {
        let mut p = EgressPort::new(0, 400_000_000_000, 4);
        p.gates = GateVector::from_bits(0b1000_1000);
        let mut lo = Frame::data(1, 0, 64);
        lo.vlan = Some(VlanTag { id: 1, pcp: 3 });
        let mut hi = Frame::data(2, 0, 64);
        hi.vlan = Some(VlanTag { id: 1, pcp: 7 });
        p.enqueue(lo);
        p.enqueue(hi);
        let t = p.transmit_step(10).unwrap();
        assert_eq!(t.queue, 7);
        assert_eq!(t.done_ps - t.start_ps, 1680);
        assert!(p.transmit_step(10).is_none());
        p.complete();
        let t = p.transmit_step(11).unwrap();
        assert_eq!((t.queue, t.start_ps), (3, 11_680));
        assert_eq!(serialization_ps(64, 400_000_000_000), 1680);
    }

    #[test]
    fn closed_gates_buffer_and_full_queues_tail_drop() {
        let mut p = EgressPort::new(0, 400_000_000_000, 2);
        for i in 0..3 {
            let mut f = Frame::data(i, 0, 64);
            f.vlan = Some(VlanTag { id: 1, pcp: 2 });
            let r = p.enqueue(f);
            assert_eq!(r, if i < 2 { EnqueueOutcome::Queued } else { EnqueueOutcome::TailDropped });
        }
        assert_eq!(p.depth(2), 2);
        assert!(p.transmit_step(0).is_none());
    }
}

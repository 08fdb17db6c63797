// SPDX-License-Identifier: Apache-2.0

//! Simulation scenarios and their compiled form.

use thiserror::Error;

use crate::dataplane::{Ipv4Addrs, MissPolicy, StreamTable, StreamTableEntry, DEFAULT_QUEUE_DEPTH, MIN_FRAME_SIZE};
use crate::schedule::{insert_gsis, validate_gcl, Gcl, GclKind, GsiMode, ScheduleError, ValidationReport, NUM_QUEUES};
use crate::tcam::{
    compile_sgcl_with, compile_tgcl_with, merge_tables, CapacityError, CompileOptions, MatTable, TableKind, TailEncoding,
    TcamError, DEFAULT_KEY_WIDTH, SGCL_CAPACITY, STREAM_CAPACITY, TGCL_CAPACITY,
};
use crate::timing::{default_control_model, default_queue_model, default_tg_model, DelayModel, TimingError};

/// Distinct list periods the hardware can track at once.
pub const MAX_PERIODS: usize = 15;

pub const GBPS: u64 = 1_000_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct DelayModels {
    pub tg: DelayModel,
    pub queue: DelayModel,
    pub control: DelayModel,
}

impl Default for DelayModels {
    fn default() -> Self {
        DelayModels { tg: default_tg_model(), queue: default_queue_model(), control: default_control_model() }
    }
}

impl DelayModels {
    /// Every delay zero, control frames of one batch coincident.
    pub fn ideal() -> Self {
        DelayModels { tg: DelayModel::Constant(0), queue: DelayModel::Constant(0), control: DelayModel::Constant(0) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PriorityDist {
    Fixed(u8),
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SourceKind {
    /// Constant inter-arrival time at `rate_pps`.
    Constant,
    /// Keeps `depth` frames in its queue: every dequeue is replaced at once.
    Backlogged { depth: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MplsTemplate {
    pub s_label: u32,
    pub f_labels: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub rate_pps: u64,
    pub size: u32,
    pub priority: PriorityDist,
    /// DetNet encapsulation; the traffic class carries the priority.
    pub mpls: Option<MplsTemplate>,
    /// VLAN of plain TSN frames, whose PCP carries the priority.
    pub vlan_id: u16,
    pub eth_dst: u64,
    pub ipv4: Option<Ipv4Addrs>,
    pub port: u16,
    pub start: u64,
    pub stop: Option<u64>,
}

impl SourceSpec {
    pub fn constant(rate_pps: u64, size: u32, priority: PriorityDist) -> Self {
        SourceSpec {
            kind: SourceKind::Constant,
            rate_pps,
            size,
            priority,
            mpls: None,
            vlan_id: 0,
            eth_dst: 0,
            ipv4: None,
            port: 0,
            start: 0,
            stop: None,
        }
    }

    pub fn backlogged(priority: u8, depth: usize, size: u32) -> Self {
        SourceSpec {
            kind: SourceKind::Backlogged { depth },
            rate_pps: 0,
            ..SourceSpec::constant(0, size, PriorityDist::Fixed(priority))
        }
    }

    pub fn with_mpls(mut self, s_label: u32, f_labels: Vec<u32>) -> Self {
        self.mpls = Some(MplsTemplate { s_label, f_labels });
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EgressMode {
    /// One egress event per change of priority, plus run-end markers.
    #[default]
    Runs,
    /// One egress event per frame.
    Frames,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct TraceOptions {
    pub control_frames: bool,
    pub frame_events: bool,
    pub egress: EgressMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Capacities {
    pub tgcl: usize,
    pub sgcl: usize,
    pub stream: usize,
}

impl Default for Capacities {
    fn default() -> Self {
        Capacities { tgcl: TGCL_CAPACITY, sgcl: SGCL_CAPACITY, stream: STREAM_CAPACITY }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct GsiConfig {
    pub duration: u64,
    pub mode: GsiMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Transmission lists before GSI insertion, one per egress port.
    pub tgcls: Vec<Gcl>,
    pub gsi: GsiConfig,
    pub sgcls: Vec<Gcl>,
    pub delays: DelayModels,
    pub sources: Vec<SourceSpec>,
    pub streams: Vec<StreamTableEntry>,
    pub miss_policy: MissPolicy,
    pub link_rate_bps: u64,
    pub capacities: Capacities,
    pub key_width: u32,
    pub tail: TailEncoding,
    pub queue_depth: usize,
    pub seed: u64,
    pub duration: u64,
    pub trace: TraceOptions,
}

impl Scenario {
    pub fn new(name: impl Into<String>, tgcl: Gcl) -> Self {
        Scenario {
            name: name.into(),
            tgcls: vec![tgcl],
            gsi: GsiConfig::default(),
            sgcls: Vec::new(),
            delays: DelayModels::default(),
            sources: Vec::new(),
            streams: Vec::new(),
            miss_policy: MissPolicy::BestEffort,
            link_rate_bps: 400 * GBPS,
            capacities: Capacities::default(),
            key_width: DEFAULT_KEY_WIDTH,
            tail: TailEncoding::Period,
            queue_depth: DEFAULT_QUEUE_DEPTH,
            seed: 1,
            duration: 100_000_000,
            trace: TraceOptions::default(),
        }
    }

    pub fn compile(&self) -> Result<CompiledScenario, ScenarioError> {
        CompiledScenario::build(self)
    }

    /// Reference duration of data entry `i` of port list `port_idx` after GSI
    /// insertion (the shrunk duration in shrink mode).
    pub fn data_entry_duration(&self, port_idx: usize, i: usize) -> u64 {
        let d = self.tgcls[port_idx].entries()[i].duration;
        match self.gsi.mode {
            GsiMode::ShrinkEntries if self.gsi.duration > 0 => d - self.gsi.duration,
            _ => d,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{which}: {report}")]
    Schedule { which: String, report: ValidationReport },
    #[error("{which}: {source}")]
    Gsi { which: String, source: ScheduleError },
    #[error("{which}: {source}")]
    Compile { which: String, source: TcamError },
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error("{count} distinct gate control list periods configured, at most {MAX_PERIODS} supported")]
    TooManyPeriods { count: usize },
    #[error("delay.{which}: {source}")]
    Delay { which: &'static str, source: TimingError },
    #[error("{0}")]
    Config(String),
}

impl ScenarioError {
    pub fn is_capacity(&self) -> bool {
        matches!(self, ScenarioError::Capacity(_))
            || matches!(self, ScenarioError::Compile { source: TcamError::Capacity(_), .. })
    }
}

/// Schedules with GSIs applied, compiled tables and period slots.
#[derive(Clone, Debug)]
pub struct CompiledScenario {
    pub tgcls: Vec<Gcl>,
    pub tgcl_mat: MatTable,
    pub sgcls: Vec<Gcl>,
    pub sgcl_mat: MatTable,
    pub stream_table: StreamTable,
    /// Distinct periods; slot 0 belongs to the first transmission list.
    pub periods: Vec<u64>,
    pub tgcl_slot: Vec<usize>,
    pub sgcl_slot: Vec<usize>,
}

impl CompiledScenario {
    fn build(s: &Scenario) -> Result<Self, ScenarioError> {
        let cfg = |m: String| Err(ScenarioError::Config(m));
        if s.tgcls.is_empty() {
            return cfg("at least one transmission gate control list is required".into());
        }
        if s.link_rate_bps == 0 {
            return cfg("link rate must be positive".into());
        }
        if s.duration == 0 {
            return cfg("simulated duration must be positive".into());
        }
        if s.queue_depth == 0 {
            return cfg("queue depth must be positive".into());
        }
        for (which, m) in [("tg", &s.delays.tg), ("queue", &s.delays.queue), ("control", &s.delays.control)] {
            m.validate().map_err(|source| ScenarioError::Delay { which, source })?;
        }
        if s.delays.queue.min_value() < 0 || s.delays.control.min_value() < 0 {
            return cfg("queue and control delays must be non-negative".into());
        }

        let opts = |capacity| CompileOptions { width: s.key_width, capacity: Some(capacity), tail: s.tail };
        let mut ports = Vec::new();
        let mut tgcls = Vec::new();
        let mut mats = Vec::new();
        for (i, g) in s.tgcls.iter().enumerate() {
            let which = format!("tgcl[{i}]");
            let GclKind::Transmission { port } = g.kind() else {
                return cfg(format!("{which} is not a transmission list"));
            };
            if ports.contains(&port) {
                return cfg(format!("{which}: port {port} has two transmission lists"));
            }
            ports.push(port);
            let report = validate_gcl(g);
            if !report.is_valid() {
                return Err(ScenarioError::Schedule { which, report });
            }
            let g = insert_gsis(g, s.gsi.duration, s.gsi.mode).map_err(|source| ScenarioError::Gsi { which: which.clone(), source })?;
            let mat = compile_tgcl_with(&g, &opts(s.capacities.tgcl)).map_err(|source| ScenarioError::Compile { which, source })?;
            tgcls.push(g);
            mats.push(mat);
        }
        let tgcl_mat = merge_tables(TableKind::Tgcl, s.key_width, s.capacities.tgcl, &mats)?;

        let mut gate_ids = Vec::new();
        let mut smats = Vec::new();
        for (i, g) in s.sgcls.iter().enumerate() {
            let which = format!("sgcl[{i}]");
            let GclKind::Stream { gate_id } = g.kind() else {
                return cfg(format!("{which} is not a stream list"));
            };
            if gate_ids.contains(&gate_id) {
                return cfg(format!("{which}: gate id {gate_id} defined twice"));
            }
            gate_ids.push(gate_id);
            let report = validate_gcl(g);
            if !report.is_valid() {
                return Err(ScenarioError::Schedule { which, report });
            }
            let mat = compile_sgcl_with(g, &opts(s.capacities.sgcl)).map_err(|source| ScenarioError::Compile { which, source })?;
            smats.push(mat);
        }
        let sgcl_mat = merge_tables(TableKind::Sgcl, s.key_width, s.capacities.sgcl, &smats)?;

        let mut stream_table = StreamTable::with_capacity(s.capacities.stream);
        stream_table.miss_policy = s.miss_policy;
        for e in &s.streams {
            if let crate::dataplane::StreamAction::Identify { sgcl_id: Some(id), .. } = e.action {
                if !gate_ids.contains(&id) {
                    return cfg(format!("stream entry refers to undefined sGCL {id}"));
                }
            }
            stream_table.insert(*e)?;
        }

        let mut periods: Vec<u64> = Vec::new();
        let mut slot_of = |h: u64| match periods.iter().position(|&p| p == h) {
            Some(i) => i,
            None => {
                periods.push(h);
                periods.len() - 1
            }
        };
        let tgcl_slot: Vec<usize> = tgcls.iter().map(|g| slot_of(g.period())).collect();
        let sgcl_slot: Vec<usize> = s.sgcls.iter().map(|g| slot_of(g.period())).collect();
        if periods.len() > MAX_PERIODS {
            return Err(ScenarioError::TooManyPeriods { count: periods.len() });
        }

        for (i, src) in s.sources.iter().enumerate() {
            let bad = |m: &str| cfg(format!("source[{i}]: {m}"));
            if src.size < MIN_FRAME_SIZE {
                return bad("frame size below 64 B");
            }
            if !ports.contains(&src.port) {
                return bad("egress port has no transmission list");
            }
            if let PriorityDist::Fixed(p) = src.priority {
                if p as usize >= NUM_QUEUES {
                    return bad("priority outside 0..=7");
                }
            }
            match src.kind {
                SourceKind::Constant if src.rate_pps == 0 => return bad("rate must be positive"),
                SourceKind::Backlogged { depth } => {
                    if !matches!(src.priority, PriorityDist::Fixed(_)) {
                        return bad("a backlogged source needs a fixed priority");
                    }
                    if depth == 0 || depth > s.queue_depth {
                        return bad("backlog depth must be within the queue depth");
                    }
                }
                SourceKind::Constant => {}
            }
            if let Some(m) = &src.mpls {
                if m.s_label >= 1 << 20 || m.f_labels.iter().any(|&l| l >= 1 << 20) {
                    return bad("MPLS labels are 20 bits");
                }
            }
            if src.vlan_id > 4095 {
                return bad("VLAN id above 4095");
            }
        }

        Ok(CompiledScenario { tgcls, tgcl_mat, sgcls: s.sgcls.clone(), sgcl_mat, stream_table, periods, tgcl_slot, sgcl_slot })
    }

    pub fn sgcl_index(&self, gate_id: u32) -> Option<usize> {
        self.sgcls.iter().position(|g| g.gate_id() == Some(gate_id))
    }
}

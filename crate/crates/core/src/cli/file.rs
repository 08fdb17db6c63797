// SPDX-License-Identifier: Apache-2.0

//! Scenario files: strict TOML, every duration in integer nanoseconds.
//!
//! ```toml
//! name = "two-entry"
//!
//! [schedule]
//! gsi = 30
//! gsi_mode = "extend"
//!
//! [[schedule.tgcl]]
//! port = 0
//! entries = [
//!     { duration = 50000, open = [0] },
//!     { duration = 50000, open = [1, 2] },
//! ]
//!
//! [[traffic]]
//! rate_pps = 1000000
//! priority = "uniform"
//!
//! [sim]
//! duration = 1000000
//! ```

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::dataplane::{FieldMatch, Ipv4Addrs, MissPolicy, StreamAction, StreamKey, StreamTableEntry};
use crate::engine::{
    Capacities, DelayModels, EgressMode, GsiConfig, MplsTemplate, PriorityDist, Scenario, ScenarioError, SourceKind,
    SourceSpec, TraceOptions, GBPS,
};
use crate::schedule::{GateVector, Gcl, GclEntry, GclKind, GsiMode, NUM_QUEUES};
use crate::tcam::TailEncoding;
use crate::timing::{default_control_model, default_queue_model, default_tg_model, DelayModel};

pub const SCENARIO_EXTENSION: &str = "scenario";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("{key}: {message}")]
    Value { key: String, message: String },
    #[error(transparent)]
    Invalid(#[from] ScenarioError),
}

impl LoadError {
    /// Whether the file itself is at fault, as opposed to the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, LoadError::Io { .. })
    }
}

fn value_err(key: impl Into<String>, message: impl Into<String>) -> LoadError {
    LoadError::Value { key: key.into(), message: message.into() }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub delay: DelaySection,
    #[serde(default)]
    pub traffic: Vec<TrafficSection>,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub capacities: CapacitySection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub trace: TraceSection,
    #[serde(default)]
    pub streams: StreamSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default)]
    pub gsi: u64,
    #[serde(default)]
    pub gsi_mode: GsiModeName,
    #[serde(default)]
    pub tail: TailName,
    pub key_width: Option<u32>,
    #[serde(default)]
    pub tgcl: Vec<TgclSection>,
    #[serde(default)]
    pub sgcl: Vec<SgclSection>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum GsiModeName {
    #[default]
    Shrink,
    Extend,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum TailName {
    #[default]
    Period,
    Clamp,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TgclSection {
    #[serde(default)]
    pub port: u16,
    pub period: Option<u64>,
    #[serde(default)]
    pub entries: Vec<TgclEntrySection>,
    pub rotation: Option<RotationSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TgclEntrySection {
    pub duration: u64,
    #[serde(default)]
    pub open: Vec<u8>,
}

/// `entries` entries of `duration` ns, entry `i` opening queue `i mod 8`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationSection {
    pub entries: usize,
    pub duration: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgclSection {
    pub gate_id: u32,
    pub period: Option<u64>,
    pub entries: Vec<SgclEntrySection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgclEntrySection {
    pub duration: u64,
    pub open: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySection {
    pub tg: Option<DelayModelSection>,
    pub queue: Option<DelayModelSection>,
    pub control: Option<DelayModelSection>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DelayModelSection {
    /// The built-in measured table of this delay.
    Default,
    Constant { value: i64 },
    Uniform { lo: i64, hi: i64 },
    Empirical { table: Vec<(i64, f64)> },
    Scripted { sequence: Vec<i64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    #[serde(default)]
    pub kind: TrafficKind,
    #[serde(default)]
    pub rate_pps: u64,
    #[serde(default = "default_size")]
    pub size: u32,
    #[serde(default)]
    pub priority: PriorityName,
    pub depth: Option<usize>,
    #[serde(default)]
    pub port: u16,
    #[serde(default)]
    pub start: u64,
    pub stop: Option<u64>,
    #[serde(default)]
    pub vlan_id: u16,
    #[serde(default)]
    pub eth_dst: u64,
    pub ipv4_src: Option<u32>,
    pub ipv4_dst: Option<u32>,
    pub mpls: Option<MplsSection>,
}

fn default_size() -> u32 {
    64
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum TrafficKind {
    #[default]
    Constant,
    Backlogged,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum PriorityName {
    Fixed(u8),
    Named(PriorityWord),
}

impl Default for PriorityName {
    fn default() -> Self {
        PriorityName::Fixed(0)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PriorityWord {
    Uniform,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MplsSection {
    pub s_label: u32,
    #[serde(default)]
    pub f_labels: Vec<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub rate_gbps: Option<u64>,
    pub rate_bps: Option<u64>,
    pub queue_depth: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    pub tgcl: Option<usize>,
    pub sgcl: Option<usize>,
    pub stream: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub seed: Option<u64>,
    pub duration: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    #[serde(default)]
    pub control_frames: bool,
    #[serde(default)]
    pub frame_events: bool,
    #[serde(default)]
    pub egress: EgressName,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum EgressName {
    #[default]
    Runs,
    Frames,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSection {
    #[serde(default)]
    pub miss_policy: MissPolicyName,
    #[serde(default)]
    pub entry: Vec<StreamEntrySection>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MissPolicyName {
    #[default]
    BestEffort,
    Drop,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamEntrySection {
    #[serde(rename = "match", default)]
    pub key: StreamMatchSection,
    pub translate: Option<TranslateSection>,
    pub identify: Option<IdentifySection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamMatchSection {
    pub s_label: Option<FieldSection>,
    pub eth_dst: Option<FieldSection>,
    pub vlan_id: Option<FieldSection>,
    pub ipv4_src: Option<FieldSection>,
    pub ipv4_dst: Option<FieldSection>,
}

/// A bare number matches exactly; a table gives value and mask.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
pub enum FieldSection {
    Exact(u64),
    Masked { value: u64, mask: u64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslateSection {
    pub vlan_id: u16,
    pub priority: Option<u8>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifySection {
    pub handle: u32,
    pub sgcl: Option<u32>,
    pub priority: Option<u8>,
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, LoadError> {
    toml::from_str(text).map_err(|e| LoadError::Parse(e.to_string().trim_end().to_string()))
}

/// Reads, converts and fully validates a scenario file, compiling every
/// table once so capacity problems surface here.
pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LoadError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let file = parse_scenario(&text).map_err(|e| match e {
        LoadError::Parse(m) => LoadError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let fallback = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let scenario = file.into_scenario(&fallback)?;
    scenario.compile()?;
    Ok(scenario)
}

impl ScenarioFile {
    pub fn into_scenario(self, fallback_name: &str) -> Result<Scenario, LoadError> {
        let sched = self.schedule;
        if sched.tgcl.is_empty() {
            return Err(value_err("schedule.tgcl", "at least one transmission list is required"));
        }
        let mut tgcls = Vec::new();
        for (i, t) in sched.tgcl.into_iter().enumerate() {
            tgcls.push(tgcl(t, &format!("schedule.tgcl[{i}]"))?);
        }
        let mut sgcls = Vec::new();
        for s in sched.sgcl {
            let kind = GclKind::Stream { gate_id: s.gate_id };
            let entries: Vec<GclEntry> = s.entries.iter().map(|e| GclEntry::stream(e.duration, e.open)).collect();
            sgcls.push(with_period(kind, entries, s.period));
        }

        let mut s = Scenario::new(self.name.unwrap_or_else(|| fallback_name.to_string()), tgcls.remove(0));
        s.tgcls.extend(tgcls);
        s.sgcls = sgcls;
        s.gsi = GsiConfig {
            duration: sched.gsi,
            mode: match sched.gsi_mode {
                GsiModeName::Shrink => GsiMode::ShrinkEntries,
                GsiModeName::Extend => GsiMode::ExtendPeriod,
            },
        };
        s.tail = match sched.tail {
            TailName::Period => TailEncoding::Period,
            TailName::Clamp => TailEncoding::ClampToMax,
        };
        if let Some(w) = sched.key_width {
            s.key_width = w;
        }

        s.delays = DelayModels {
            tg: delay(self.delay.tg, default_tg_model),
            queue: delay(self.delay.queue, default_queue_model),
            control: delay(self.delay.control, default_control_model),
        };

        for (i, t) in self.traffic.into_iter().enumerate() {
            s.sources.push(source(t, &format!("traffic[{i}]"))?);
        }

        match (self.link.rate_gbps, self.link.rate_bps) {
            (Some(_), Some(_)) => return Err(value_err("link", "give rate_gbps or rate_bps, not both")),
            (Some(g), None) => s.link_rate_bps = g * GBPS,
            (None, Some(b)) => s.link_rate_bps = b,
            (None, None) => {}
        }
        if let Some(d) = self.link.queue_depth {
            s.queue_depth = d;
        }

        let c = Capacities::default();
        s.capacities = Capacities {
            tgcl: self.capacities.tgcl.unwrap_or(c.tgcl),
            sgcl: self.capacities.sgcl.unwrap_or(c.sgcl),
            stream: self.capacities.stream.unwrap_or(c.stream),
        };
        if let Some(seed) = self.sim.seed {
            s.seed = seed;
        }
        if let Some(d) = self.sim.duration {
            s.duration = d;
        }
        s.trace = TraceOptions {
            control_frames: self.trace.control_frames,
            frame_events: self.trace.frame_events,
            egress: match self.trace.egress {
                EgressName::Runs => EgressMode::Runs,
                EgressName::Frames => EgressMode::Frames,
            },
        };

        s.miss_policy = match self.streams.miss_policy {
            MissPolicyName::BestEffort => MissPolicy::BestEffort,
            MissPolicyName::Drop => MissPolicy::Drop,
        };
        for (i, e) in self.streams.entry.into_iter().enumerate() {
            s.streams.push(stream_entry(e, &format!("streams.entry[{i}]"))?);
        }
        Ok(s)
    }
}

fn with_period(kind: GclKind, entries: Vec<GclEntry>, period: Option<u64>) -> Gcl {
    match period {
        Some(p) => Gcl::with_period(kind, entries, p),
        None => Gcl::new(kind, entries),
    }
}

fn tgcl(t: TgclSection, key: &str) -> Result<Gcl, LoadError> {
    let kind = GclKind::Transmission { port: t.port };
    let entries = match (t.rotation, t.entries.is_empty()) {
        (Some(_), false) => return Err(value_err(key, "give entries or rotation, not both")),
        (Some(r), true) => Gcl::rotation(t.port, r.entries, r.duration).entries().to_vec(),
        (None, _) => {
            let mut out = Vec::with_capacity(t.entries.len());
            for (j, e) in t.entries.iter().enumerate() {
                let mut gates = GateVector::ALL_CLOSED;
                for &q in &e.open {
                    if q as usize >= NUM_QUEUES {
                        return Err(value_err(format!("{key}.entries[{j}].open"), format!("queue {q} outside 0..=7")));
                    }
                    gates = gates.with(q, true);
                }
                out.push(GclEntry::transmission(e.duration, gates));
            }
            out
        }
    };
    Ok(with_period(kind, entries, t.period))
}

fn delay(section: Option<DelayModelSection>, default: fn() -> DelayModel) -> DelayModel {
    match section {
        None | Some(DelayModelSection::Default) => default(),
        Some(DelayModelSection::Constant { value }) => DelayModel::Constant(value),
        Some(DelayModelSection::Uniform { lo, hi }) => DelayModel::Uniform { lo, hi },
        Some(DelayModelSection::Empirical { table }) => DelayModel::Empirical(table),
        Some(DelayModelSection::Scripted { sequence }) => DelayModel::Scripted(sequence),
    }
}

fn source(t: TrafficSection, key: &str) -> Result<SourceSpec, LoadError> {
    let priority = match t.priority {
        PriorityName::Fixed(p) if p as usize >= NUM_QUEUES => {
            return Err(value_err(format!("{key}.priority"), format!("priority {p} outside 0..=7")))
        }
        PriorityName::Fixed(p) => PriorityDist::Fixed(p),
        PriorityName::Named(PriorityWord::Uniform) => PriorityDist::Uniform,
    };
    let kind = match (t.kind, t.depth) {
        (TrafficKind::Constant, None) => SourceKind::Constant,
        (TrafficKind::Constant, Some(_)) => return Err(value_err(format!("{key}.depth"), "only backlogged sources have a depth")),
        (TrafficKind::Backlogged, d) => SourceKind::Backlogged { depth: d.unwrap_or(64) },
    };
    let ipv4 = match (t.ipv4_src, t.ipv4_dst) {
        (None, None) => None,
        (src, dst) => Some(Ipv4Addrs { src: src.unwrap_or(0), dst: dst.unwrap_or(0) }),
    };
    Ok(SourceSpec {
        kind,
        rate_pps: t.rate_pps,
        size: t.size,
        priority,
        mpls: t.mpls.map(|m| MplsTemplate { s_label: m.s_label, f_labels: m.f_labels }),
        vlan_id: t.vlan_id,
        eth_dst: t.eth_dst,
        ipv4,
        port: t.port,
        start: t.start,
        stop: t.stop,
    })
}

fn field(f: Option<FieldSection>) -> FieldMatch {
    match f {
        None => FieldMatch::ANY,
        Some(FieldSection::Exact(v)) => FieldMatch::exact(v),
        Some(FieldSection::Masked { value, mask }) => FieldMatch { value, mask },
    }
}

fn stream_entry(e: StreamEntrySection, key: &str) -> Result<StreamTableEntry, LoadError> {
    let m = e.key;
    let key_fields = StreamKey {
        s_label: field(m.s_label),
        eth_dst: field(m.eth_dst),
        vlan_id: field(m.vlan_id),
        ipv4_src: field(m.ipv4_src),
        ipv4_dst: field(m.ipv4_dst),
    };
    let action = match (e.translate, e.identify) {
        (Some(t), None) => StreamAction::Translate { vlan_id: t.vlan_id, priority: t.priority },
        (None, Some(i)) => StreamAction::Identify { handle: i.handle, sgcl_id: i.sgcl, priority: i.priority },
        _ => return Err(value_err(key, "exactly one of translate or identify is required")),
    };
    Ok(StreamTableEntry { key: key_fields, action })
}

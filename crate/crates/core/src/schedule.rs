// SPDX-License-Identifier: Apache-2.0

//! Gate control lists for transmission gates (tGCL) and stream gates (sGCL).
//!
//! Entries occupy half-open intervals `[start, start + duration)` of the
//! relative cycle time, so a boundary instant belongs to the next entry.

use std::fmt;

use thiserror::Error;

/// Number of egress queues (and transmission gates) per port.
pub const NUM_QUEUES: usize = 8;

/// Open/closed state of the eight transmission gates of a port.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GateVector(u8);

impl GateVector {
    pub const ALL_CLOSED: GateVector = GateVector(0);
    pub const ALL_OPEN: GateVector = GateVector(0xff);

    pub const fn from_bits(bits: u8) -> Self {
        GateVector(bits)
    }

    pub const fn bits(self) -> u8 {
        self.0
    }

    /// Only queue `q` open.
    pub fn single(q: u8) -> Self {
        assert!((q as usize) < NUM_QUEUES, "queue index {q} out of range");
        GateVector(1 << q)
    }

    pub fn from_gates(gates: [bool; NUM_QUEUES]) -> Self {
        let mut bits = 0u8;
        for (q, open) in gates.iter().enumerate() {
            if *open {
                bits |= 1 << q;
            }
        }
        GateVector(bits)
    }

    pub fn gates(self) -> [bool; NUM_QUEUES] {
        std::array::from_fn(|q| self.is_open(q as u8))
    }

    pub fn is_open(self, q: u8) -> bool {
        self.0 & (1 << q) != 0
    }

    pub fn with(self, q: u8, open: bool) -> Self {
        if open {
            GateVector(self.0 | (1 << q))
        } else {
            GateVector(self.0 & !(1 << q))
        }
    }

    pub fn is_all_closed(self) -> bool {
        self.0 == 0
    }

    pub fn open_count(self) -> u32 {
        self.0.count_ones()
    }
}

impl fmt::Debug for GateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GateVector({self})")
    }
}

/// Queue 0 first, `o` for open and `C` for closed.
impl fmt::Display for GateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..NUM_QUEUES as u8 {
            f.write_str(if self.is_open(q) { "o" } else { "C" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateState {
    Transmission(GateVector),
    Stream(bool),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GclEntry {
    pub duration: u64,
    pub state: GateState,
    pub is_gsi: bool,
}

impl GclEntry {
    pub fn transmission(duration: u64, gates: GateVector) -> Self {
        GclEntry { duration, state: GateState::Transmission(gates), is_gsi: false }
    }

    pub fn stream(duration: u64, open: bool) -> Self {
        GclEntry { duration, state: GateState::Stream(open), is_gsi: false }
    }

    /// Gate switching interval: every transmission gate closed.
    pub fn gsi(duration: u64) -> Self {
        GclEntry { duration, state: GateState::Transmission(GateVector::ALL_CLOSED), is_gsi: true }
    }

    pub fn gates(&self) -> Option<GateVector> {
        match self.state {
            GateState::Transmission(g) => Some(g),
            GateState::Stream(_) => None,
        }
    }

    pub fn stream_open(&self) -> Option<bool> {
        match self.state {
            GateState::Stream(o) => Some(o),
            GateState::Transmission(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GclKind {
    Transmission { port: u16 },
    Stream { gate_id: u32 },
}

impl GclKind {
    pub fn is_transmission(self) -> bool {
        matches!(self, GclKind::Transmission { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gcl {
    kind: GclKind,
    entries: Vec<GclEntry>,
    period: u64,
    starts: Vec<u64>,
}

impl Gcl {
    /// Builds a list whose period is the sum of its entry durations.
    pub fn new(kind: GclKind, entries: Vec<GclEntry>) -> Self {
        let period = entries.iter().map(|e| e.duration).sum();
        Self::with_period(kind, entries, period)
    }

    /// Builds a list with an explicitly declared period. Nothing is checked
    /// here; run [`validate_gcl`] before use.
    pub fn with_period(kind: GclKind, entries: Vec<GclEntry>, period: u64) -> Self {
        let mut starts = Vec::with_capacity(entries.len());
        let mut t = 0u64;
        for e in &entries {
            starts.push(t);
            t += e.duration;
        }
        Gcl { kind, entries, period, starts }
    }

    /// `n` transmission entries of `duration` each, entry `i` opening only
    /// queue `i % 8`.
    pub fn rotation(port: u16, n: usize, duration: u64) -> Self {
        let entries = (0..n)
            .map(|i| GclEntry::transmission(duration, GateVector::single((i % NUM_QUEUES) as u8)))
            .collect();
        Gcl::new(GclKind::Transmission { port }, entries)
    }

    pub fn kind(&self) -> GclKind {
        self.kind
    }

    pub fn entries(&self) -> &[GclEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    /// Start offset of entry `i` within the cycle.
    pub fn start(&self, i: usize) -> u64 {
        self.starts[i]
    }

    /// Half-open interval `[start, end)` of entry `i`.
    pub fn interval(&self, i: usize) -> (u64, u64) {
        let s = self.starts[i];
        (s, s + self.entries[i].duration)
    }

    pub fn port(&self) -> Option<u16> {
        match self.kind {
            GclKind::Transmission { port } => Some(port),
            GclKind::Stream { .. } => None,
        }
    }

    pub fn gate_id(&self) -> Option<u32> {
        match self.kind {
            GclKind::Stream { gate_id } => Some(gate_id),
            GclKind::Transmission { .. } => None,
        }
    }

    /// Entry active at `rel_time`. Times at or beyond the end of the list are
    /// clamped to the final entry; `None` only for an empty list.
    pub fn entry_at(&self, rel_time: u64) -> Option<(usize, &GclEntry)> {
        if self.entries.is_empty() {
            return None;
        }
        let i = self.starts.partition_point(|&s| s <= rel_time) - 1;
        Some((i, &self.entries[i]))
    }
}

/// Free-function form of [`Gcl::entry_at`].
pub fn entry_at(gcl: &Gcl, rel_time: u64) -> Option<(usize, &GclEntry)> {
    gcl.entry_at(rel_time)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Empty,
    ZeroDuration { index: usize },
    PeriodMismatch { declared: u64, sum: u64 },
    KindMismatch { index: usize },
    GsiNotClosed { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "entry list is empty"),
            Violation::ZeroDuration { index } => write!(f, "entry {index} has zero duration"),
            Violation::PeriodMismatch { declared, sum } => {
                write!(f, "period mismatch: declared {declared} ns, entries sum to {sum} ns")
            }
            Violation::KindMismatch { index } => {
                write!(f, "entry {index} does not match the list kind")
            }
            Violation::GsiNotClosed { index } => {
                write!(f, "entry {index} is marked as GSI but is not an all-closed transmission entry")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_gcl(gcl: &Gcl) -> ValidationReport {
    let mut violations = Vec::new();
    if gcl.entries.is_empty() {
        violations.push(Violation::Empty);
    }
    let transmission = gcl.kind.is_transmission();
    let mut sum = 0u64;
    for (index, e) in gcl.entries.iter().enumerate() {
        sum += e.duration;
        if e.duration == 0 {
            violations.push(Violation::ZeroDuration { index });
        }
        let kind_ok = matches!(
            (transmission, e.state),
            (true, GateState::Transmission(_)) | (false, GateState::Stream(_))
        );
        if !kind_ok {
            violations.push(Violation::KindMismatch { index });
        }
        if e.is_gsi && e.state != GateState::Transmission(GateVector::ALL_CLOSED) {
            violations.push(Violation::GsiNotClosed { index });
        }
    }
    if !gcl.entries.is_empty() && sum != gcl.period {
        violations.push(Violation::PeriodMismatch { declared: gcl.period, sum });
    }
    ValidationReport { violations }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum GsiMode {
    /// Each GSI is added on top of the original entries; the period grows.
    ExtendPeriod,
    /// Each original entry gives up the GSI duration; the period is kept.
    #[default]
    ShrinkEntries,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("GSIs can only be inserted into a transmission gate control list")]
    NotTransmission,
    #[error("schedule infeasible: entry {index} lasts {duration} ns, not longer than the {gsi} ns GSI")]
    Infeasible { index: usize, duration: u64, gsi: u64 },
    #[error("invalid gate control list: {0}")]
    Invalid(ValidationReport),
}

/// Places one all-closed GSI entry after every entry, including the last.
pub fn insert_gsis(gcl: &Gcl, gsi_duration: u64, mode: GsiMode) -> Result<Gcl, ScheduleError> {
    if !gcl.kind.is_transmission() {
        return Err(ScheduleError::NotTransmission);
    }
    if gsi_duration == 0 {
        return Ok(gcl.clone());
    }
    let mut entries = Vec::with_capacity(gcl.entries.len() * 2);
    for (index, e) in gcl.entries.iter().enumerate() {
        let duration = match mode {
            GsiMode::ExtendPeriod => e.duration,
            GsiMode::ShrinkEntries => {
                if e.duration <= gsi_duration {
                    return Err(ScheduleError::Infeasible { index, duration: e.duration, gsi: gsi_duration });
                }
                e.duration - gsi_duration
            }
        };
        entries.push(GclEntry { duration, ..*e });
        entries.push(GclEntry::gsi(gsi_duration));
    }
    let period = match mode {
        GsiMode::ExtendPeriod => gcl.period + gsi_duration * gcl.entries.len() as u64,
        GsiMode::ShrinkEntries => gcl.period,
    };
    Ok(Gcl::with_period(gcl.kind, entries, period))
}

/// Drops every GSI entry; inverts [`insert_gsis`] in extend-period mode.
pub fn remove_gsis(gcl: &Gcl) -> Gcl {
    let entries: Vec<GclEntry> = gcl.entries.iter().filter(|e| !e.is_gsi).copied().collect();
    Gcl::new(gcl.kind, entries)
}

// SPDX-License-Identifier: Apache-2.0

//! Ternary match tables compiled from gate control lists.

use std::fmt;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::schedule::{validate_gcl, Gcl, GclKind, NUM_QUEUES};

pub const DEFAULT_KEY_WIDTH: u32 = 48;
pub const MAX_KEY_WIDTH: u32 = 48;

pub const TGCL_CAPACITY: usize = 39_000;
pub const SGCL_CAPACITY: usize = 6_000;
pub const STREAM_CAPACITY: usize = 8_196;

/// A value/mask pair; mask bits set to 1 must match exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Prefix {
    pub value: u64,
    pub mask: u64,
}

impl Prefix {
    pub fn matches(&self, x: u64) -> bool {
        x & self.mask == self.value
    }

    /// Smallest and largest covered key within a `w`-bit domain.
    pub fn bounds(&self, w: u32) -> (u64, u64) {
        (self.value, self.value | (width_mask(w) & !self.mask))
    }

    /// Bit string, most significant first, with `*` for wildcard bits.
    pub fn to_ternary_string(&self, w: u32) -> String {
        (0..w)
            .rev()
            .map(|b| {
                if self.mask >> b & 1 == 0 {
                    '*'
                } else if self.value >> b & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }
}

pub fn width_mask(w: u32) -> u64 {
    if w >= 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TableKind {
    Tgcl,
    Sgcl,
    Stream,
}

impl TableKind {
    pub fn default_capacity(self) -> usize {
        match self {
            TableKind::Tgcl => TGCL_CAPACITY,
            TableKind::Sgcl => SGCL_CAPACITY,
            TableKind::Stream => STREAM_CAPACITY,
        }
    }
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableKind::Tgcl => "tGCL",
            TableKind::Sgcl => "sGCL",
            TableKind::Stream => "stream identification",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("{table} table capacity exceeded: {count} entries > {capacity} (excess {})", self.excess())]
pub struct CapacityError {
    pub table: TableKind,
    pub count: usize,
    pub capacity: usize,
}

impl CapacityError {
    pub fn excess(&self) -> usize {
        self.count - self.capacity
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TcamError {
    #[error("key width {0} outside 1..=48")]
    Width(u32),
    #[error("range [{lo}, {hi}] is empty or exceeds the {w}-bit key domain")]
    Domain { lo: u64, hi: u64, w: u32 },
    #[error("expected a {expected} gate control list")]
    WrongKind { expected: &'static str },
    #[error("invalid gate control list: {0}")]
    Invalid(String),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

/// Greedy range-to-prefix expansion: from the current lower bound, take the
/// largest aligned block that stays within `hi`.
pub fn range_to_prefixes(lo: u64, hi: u64, w: u32) -> Result<Vec<Prefix>, TcamError> {
    if w == 0 || w > MAX_KEY_WIDTH {
        return Err(TcamError::Width(w));
    }
    let full = width_mask(w);
    if lo > hi || hi > full {
        return Err(TcamError::Domain { lo, hi, w });
    }
    let mut out = Vec::new();
    let mut cur = lo;
    loop {
        let align = if cur == 0 { w } else { cur.trailing_zeros().min(w) };
        let remaining = hi - cur + 1;
        let fit = 63 - remaining.leading_zeros();
        let k = align.min(fit);
        let size = 1u64 << k;
        out.push(Prefix { value: cur, mask: full & !(size - 1) });
        if hi - cur + 1 == size {
            break;
        }
        cur += size;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatchField<T> {
    Any,
    Exact(T),
}

impl<T: PartialEq + Copy> MatchField<T> {
    pub fn matches(&self, key: Option<T>) -> bool {
        match self {
            MatchField::Any => true,
            MatchField::Exact(v) => key == Some(*v),
        }
    }

    pub fn exact(&self) -> Option<T> {
        match self {
            MatchField::Any => None,
            MatchField::Exact(v) => Some(*v),
        }
    }
}

impl<T: fmt::Display> fmt::Display for MatchField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchField::Any => f.write_str("*"),
            MatchField::Exact(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Open,
    Close,
    Pass,
    Drop,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Open => "open",
            Action::Close => "close",
            Action::Pass => "pass",
            Action::Drop => "drop",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TernaryEntry {
    pub value: u64,
    pub mask: u64,
    pub port: MatchField<u16>,
    pub queue: MatchField<u8>,
    pub gate_id: MatchField<u32>,
    pub action: Action,
    pub priority_order: u32,
}

impl TernaryEntry {
    pub fn prefix(&self) -> Prefix {
        Prefix { value: self.value, mask: self.mask }
    }

    pub fn matches(&self, key: &TernaryKey) -> bool {
        key.timestamp & self.mask == self.value
            && self.port.matches(key.port)
            && self.queue.matches(key.queue)
            && self.gate_id.matches(key.gate_id)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TernaryKey {
    pub timestamp: u64,
    pub port: Option<u16>,
    pub queue: Option<u8>,
    pub gate_id: Option<u32>,
}

impl TernaryKey {
    pub fn tgcl(timestamp: u64, port: u16, queue: u8) -> Self {
        TernaryKey { timestamp, port: Some(port), queue: Some(queue), gate_id: None }
    }

    pub fn sgcl(timestamp: u64, gate_id: u32) -> Self {
        TernaryKey { timestamp, port: None, queue: None, gate_id: Some(gate_id) }
    }
}

type GroupKey = (MatchField<u16>, MatchField<u8>, MatchField<u32>);

/// Per exact-field group, entries as sorted disjoint intervals. Only built
/// when it reproduces first-match results exactly.
#[derive(Clone, Debug, Default)]
struct IntervalIndex {
    exact: [bool; 3],
    groups: FxHashMap<GroupKey, Vec<(u64, u64, usize)>>,
}

#[derive(Clone, Debug)]
pub struct MatTable {
    pub kind: TableKind,
    pub width: u32,
    pub capacity: usize,
    entries: Vec<TernaryEntry>,
    index: Option<IntervalIndex>,
}

impl MatTable {
    /// Capacity is not enforced here; see [`capacity_check`].
    pub fn from_entries(kind: TableKind, width: u32, capacity: usize, entries: Vec<TernaryEntry>) -> Self {
        let mut t = MatTable { kind, width, capacity, entries, index: None };
        t.index = t.build_index();
        t
    }

    pub fn empty(kind: TableKind, width: u32) -> Self {
        Self::from_entries(kind, width, kind.default_capacity(), Vec::new())
    }

    pub fn entries(&self) -> &[TernaryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Whether lookups go through the interval index instead of a scan.
    pub fn is_indexed(&self) -> bool {
        self.index.is_some()
    }

    fn build_index(&self) -> Option<IntervalIndex> {
        let mut groups: FxHashMap<GroupKey, Vec<(u64, u64, usize)>> = FxHashMap::default();
        for (i, e) in self.entries.iter().enumerate() {
            if e.port == MatchField::Any && e.queue == MatchField::Any && e.gate_id == MatchField::Any {
                return None;
            }
            let (lo, hi) = e.prefix().bounds(self.width);
            groups.entry((e.port, e.queue, e.gate_id)).or_default().push((lo, hi, i));
        }
        // Mixed wildcard patterns would let one group shadow another.
        let pattern = |(p, q, g): &GroupKey| [p.exact().is_some(), q.exact().is_some(), g.exact().is_some()];
        let exact = groups.keys().next().map(pattern).unwrap_or([true; 3]);
        if groups.keys().any(|k| pattern(k) != exact) {
            return None;
        }
        for v in groups.values_mut() {
            v.sort_unstable_by_key(|&(lo, _, _)| lo);
            if v.windows(2).any(|w| w[1].0 <= w[0].1) {
                return None;
            }
        }
        let order_is_insertion = self.entries.windows(2).all(|w| w[0].priority_order <= w[1].priority_order);
        if !order_is_insertion {
            return None;
        }
        Some(IntervalIndex { exact, groups })
    }

    pub fn lookup(&self, key: &TernaryKey) -> Option<&TernaryEntry> {
        if let Some(idx) = &self.index {
            fn field<T>(exact: bool, v: Option<T>) -> Option<MatchField<T>> {
                if !exact {
                    return Some(MatchField::Any);
                }
                v.map(MatchField::Exact)
            }
            let gk = (
                field(idx.exact[0], key.port)?,
                field(idx.exact[1], key.queue)?,
                field(idx.exact[2], key.gate_id)?,
            );
            let ivs = idx.groups.get(&gk)?;
            let ts = key.timestamp;
            let pos = ivs.partition_point(|&(lo, _, _)| lo <= ts);
            if pos == 0 {
                return None;
            }
            let (_, hi, i) = ivs[pos - 1];
            return (ts <= hi).then(|| &self.entries[i]);
        }
        self.scan(key)
    }

    /// Reference first-match semantics: lowest `priority_order`, ties broken
    /// by insertion order.
    pub fn scan(&self, key: &TernaryKey) -> Option<&TernaryEntry> {
        let mut best: Option<&TernaryEntry> = None;
        for e in &self.entries {
            if e.matches(key) && best.map_or(true, |b| e.priority_order < b.priority_order) {
                best = Some(e);
            }
        }
        best
    }

    /// Appends an entry, refusing to grow beyond the capacity.
    pub fn push(&mut self, entry: TernaryEntry) -> Result<(), CapacityError> {
        if self.entries.len() >= self.capacity {
            return Err(CapacityError { table: self.kind, count: self.entries.len() + 1, capacity: self.capacity });
        }
        self.entries.push(entry);
        self.index = self.build_index();
        Ok(())
    }
}

pub fn ternary_match<'a>(table: &'a MatTable, key: &TernaryKey) -> Option<&'a TernaryEntry> {
    table.lookup(key)
}

pub fn capacity_check(table: &MatTable) -> Result<(), CapacityError> {
    if table.len() <= table.capacity {
        Ok(())
    } else {
        Err(CapacityError { table: table.kind, count: table.len(), capacity: table.capacity })
    }
}

/// How the final entry's range is encoded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TailEncoding {
    /// The final entry covers exactly its interval inside `[0, h)`.
    #[default]
    Period,
    /// The final entry is extended to the top of the key domain, so late
    /// relative times match it in the table itself.
    ClampToMax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    pub width: u32,
    pub capacity: Option<usize>,
    pub tail: TailEncoding,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { width: DEFAULT_KEY_WIDTH, capacity: None, tail: TailEncoding::Period }
    }
}

impl CompileOptions {
    pub fn width(w: u32) -> Self {
        CompileOptions { width: w, ..Default::default() }
    }
}

fn entry_ranges(gcl: &Gcl, opts: &CompileOptions) -> Result<Vec<Vec<Prefix>>, TcamError> {
    let report = validate_gcl(gcl);
    if !report.is_valid() {
        return Err(TcamError::Invalid(report.to_string()));
    }
    let last = gcl.len() - 1;
    (0..gcl.len())
        .map(|i| {
            let (s, e) = gcl.interval(i);
            let hi = if i == last && opts.tail == TailEncoding::ClampToMax {
                width_mask(opts.width).max(e - 1)
            } else {
                e - 1
            };
            range_to_prefixes(s, hi, opts.width)
        })
        .collect()
}

pub fn compile_tgcl(gcl: &Gcl, w: u32) -> Result<MatTable, TcamError> {
    compile_tgcl_with(gcl, &CompileOptions::width(w))
}

/// One block of ternary entries per (entry, queue); closed queues get
/// explicit close entries so every instant is covered for every queue.
pub fn compile_tgcl_with(gcl: &Gcl, opts: &CompileOptions) -> Result<MatTable, TcamError> {
    let GclKind::Transmission { port } = gcl.kind() else {
        return Err(TcamError::WrongKind { expected: "transmission" });
    };
    let ranges = entry_ranges(gcl, opts)?;
    let mut entries = Vec::new();
    for (i, prefixes) in ranges.iter().enumerate() {
        let gates = gcl.entries()[i].gates().expect("validated kind");
        for q in 0..NUM_QUEUES as u8 {
            let action = if gates.is_open(q) { Action::Open } else { Action::Close };
            for p in prefixes {
                entries.push(TernaryEntry {
                    value: p.value,
                    mask: p.mask,
                    port: MatchField::Exact(port),
                    queue: MatchField::Exact(q),
                    gate_id: MatchField::Any,
                    action,
                    priority_order: entries.len() as u32,
                });
            }
        }
    }
    finish(TableKind::Tgcl, opts, entries)
}

pub fn compile_sgcl(gcl: &Gcl, w: u32) -> Result<MatTable, TcamError> {
    compile_sgcl_with(gcl, &CompileOptions::width(w))
}

pub fn compile_sgcl_with(gcl: &Gcl, opts: &CompileOptions) -> Result<MatTable, TcamError> {
    let GclKind::Stream { gate_id } = gcl.kind() else {
        return Err(TcamError::WrongKind { expected: "stream" });
    };
    let ranges = entry_ranges(gcl, opts)?;
    let mut entries = Vec::new();
    for (i, prefixes) in ranges.iter().enumerate() {
        let open = gcl.entries()[i].stream_open().expect("validated kind");
        let action = if open { Action::Pass } else { Action::Drop };
        for p in prefixes {
            entries.push(TernaryEntry {
                value: p.value,
                mask: p.mask,
                port: MatchField::Any,
                queue: MatchField::Any,
                gate_id: MatchField::Exact(gate_id),
                action,
                priority_order: entries.len() as u32,
            });
        }
    }
    finish(TableKind::Sgcl, opts, entries)
}

/// Combines several compiled tables of one kind into a single table, as
/// when several lists share one hardware MAT.
pub fn merge_tables(kind: TableKind, width: u32, capacity: usize, tables: &[MatTable]) -> Result<MatTable, CapacityError> {
    let mut entries = Vec::new();
    for t in tables {
        for e in t.entries() {
            entries.push(TernaryEntry { priority_order: entries.len() as u32, ..*e });
        }
    }
    let table = MatTable::from_entries(kind, width, capacity, entries);
    capacity_check(&table)?;
    Ok(table)
}

fn finish(kind: TableKind, opts: &CompileOptions, entries: Vec<TernaryEntry>) -> Result<MatTable, TcamError> {
    let capacity = opts.capacity.unwrap_or(kind.default_capacity());
    let table = MatTable::from_entries(kind, opts.width, capacity, entries);
    capacity_check(&table)?;
    Ok(table)
}

/// Worst-case ternary entries for `n` tGCL entries: `8 * n * (2w - 2)`.
pub fn tgcl_bound(n: usize, w: u32) -> usize {
    NUM_QUEUES * n * (2 * w as usize - 2)
}

/// Worst-case ternary entries for `n` sGCL entries: `n * (2w - 2)`.
pub fn sgcl_bound(n: usize, w: u32) -> usize {
    n * (2 * w as usize - 2)
}

/// CSV rows `value,mask,port,queue,gate_id,action` for a compiled table.
pub fn write_table_csv<W: std::io::Write>(table: &MatTable, out: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["value", "mask", "port", "queue", "gate_id", "action"])?;
    let digits = table.width.div_ceil(4) as usize;
    for e in table.entries() {
        wtr.write_record([
            format!("0x{:0digits$x}", e.value),
            format!("0x{:0digits$x}", e.mask),
            e.port.to_string(),
            e.queue.to_string(),
            e.gate_id.to_string(),
            e.action.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

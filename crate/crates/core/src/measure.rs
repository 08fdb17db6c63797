// SPDX-License-Identifier: Apache-2.0

//! Metrics recomputed from traces.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::io::{self, Write};

use smallvec::SmallVec;

use crate::engine::{EventClass, Trace, TraceEvent, TraceSink};

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub min: i64,
    pub max: i64,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} min={} q1={:.2} median={:.2} mean={:.2} q3={:.2} max={}",
            self.count, self.min, self.q1, self.median, self.mean, self.q3, self.max
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DelaySeries {
    pub name: String,
    pub values: Vec<i64>,
}

impl DelaySeries {
    pub fn new(name: impl Into<String>, values: Vec<i64>) -> Self {
        DelaySeries { name: name.into(), values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn summary(&self) -> Option<Summary> {
        if self.values.is_empty() {
            return None;
        }
        let mut v = self.values.clone();
        v.sort_unstable();
        let n = v.len();
        Some(Summary {
            count: n,
            min: v[0],
            max: v[n - 1],
            mean: v.iter().map(|&x| x as f64).sum::<f64>() / n as f64,
            median: quantile(&v, 0.5),
            q1: quantile(&v, 0.25),
            q3: quantile(&v, 0.75),
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        writeln!(out, "index,{}", self.name)?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        out.flush()
    }
}

/// Linear interpolation between closest ranks of sorted data.
pub fn quantile(sorted: &[i64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] as f64 + (sorted[hi] - sorted[lo]) as f64 * frac
}

/// Period deviations `(t[j+1] - t[j]) - h` per period slot, slots in order.
pub fn measure_tg(trace: &Trace) -> DelaySeries {
    let mut by_slot: BTreeMap<u16, (Option<u64>, Vec<i64>)> = BTreeMap::new();
    for e in trace.of(EventClass::Completion) {
        let h = e.aux.unwrap_or(0);
        let entry = by_slot.entry(e.port.unwrap_or(0)).or_default();
        if let Some(prev) = entry.0 {
            entry.1.push(e.time as i64 - prev as i64 - h);
        }
        entry.0 = Some(e.time);
    }
    DelaySeries::new("delta_tg", by_slot.into_values().flat_map(|(_, v)| v).collect())
}

/// Queue opening delay: first dequeue after an opening minus the time the
/// opening was written, for openings that found the queue non-empty.
pub fn measure_queue_delay(trace: &Trace) -> DelaySeries {
    let mut writes: HashMap<(u16, u8), VecDeque<u64>> = HashMap::new();
    let mut waiting: HashMap<(u16, u8), u64> = HashMap::new();
    let mut values = Vec::new();
    for e in &trace.events {
        let key = (e.port.unwrap_or(0), e.queue.unwrap_or(0));
        match e.event {
            EventClass::WriteOpen => writes.entry(key).or_default().push_back(e.time),
            EventClass::GateOpen => {
                let written = writes.get_mut(&key).and_then(VecDeque::pop_front);
                if let (Some(w), true) = (written, e.aux.unwrap_or(0) > 0) {
                    waiting.insert(key, w);
                }
            }
            EventClass::GateClose => {
                waiting.remove(&key);
            }
            EventClass::Dequeue => {
                if let Some(w) = waiting.remove(&key) {
                    values.push(e.time as i64 - w as i64);
                }
            }
            _ => {}
        }
    }
    DelaySeries::new("delta_queue", values)
}

/// Gaps between consecutive control frames.
pub fn measure_control_delay(trace: &Trace) -> DelaySeries {
    let times: Vec<u64> = trace.of(EventClass::Control).map(|e| e.time).collect();
    DelaySeries::new("delta_control", times.windows(2).map(|w| (w[1] - w[0]) as i64).collect())
}

/// Streaming form of [`measure_control_delay`] that keeps only a gap
/// histogram, for runs too long to hold in memory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ControlGapCounter {
    last: Option<u64>,
    pub counts: BTreeMap<i64, u64>,
}

impl TraceSink for ControlGapCounter {
    fn record(&mut self, ev: TraceEvent) {
        if ev.event != EventClass::Control {
            return;
        }
        if let Some(prev) = self.last {
            *self.counts.entry((ev.time - prev) as i64).or_default() += 1;
        }
        self.last = Some(ev.time);
    }
}

impl ControlGapCounter {
    pub fn len(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn summary(&self) -> Option<Summary> {
        let n = self.len();
        if n == 0 {
            return None;
        }
        let nth = |k: u64| {
            let mut seen = 0;
            for (&v, &c) in &self.counts {
                seen += c;
                if k < seen {
                    return v;
                }
            }
            unreachable!()
        };
        let q = |p: f64| {
            let pos = p * (n - 1) as f64;
            let (lo, hi) = (nth(pos.floor() as u64), nth(pos.ceil() as u64));
            lo as f64 + (hi - lo) as f64 * pos.fract()
        };
        let sum: f64 = self.counts.iter().map(|(&v, &c)| v as f64 * c as f64).sum();
        Some(Summary {
            count: n as usize,
            min: *self.counts.keys().next()?,
            max: *self.counts.keys().next_back()?,
            mean: sum / n as f64,
            median: q(0.5),
            q1: q(0.25),
            q3: q(0.75),
        })
    }
}

/// A maximal sequence of same-priority frames received on one port.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EgressRun {
    pub port: u16,
    pub priority: u8,
    pub t_first: u64,
    pub t_last: u64,
    pub count: u64,
}

impl EgressRun {
    pub fn duration(&self) -> u64 {
        self.t_last - self.t_first
    }
}

/// Reconstructs egress runs from either per-frame or per-run traces.
pub fn egress_runs(trace: &Trace) -> Vec<EgressRun> {
    let run_mode = trace.events.iter().any(|e| e.event == EventClass::RunEnd);
    let mut open: BTreeMap<u16, EgressRun> = BTreeMap::new();
    let mut out = Vec::new();
    for e in &trace.events {
        let port = e.port.unwrap_or(0);
        match e.event {
            EventClass::Egress => {
                let prio = e.priority.unwrap_or(0);
                if !run_mode {
                    if let Some(r) = open.get_mut(&port) {
                        if r.priority == prio {
                            r.t_last = e.time;
                            r.count += 1;
                            continue;
                        }
                        out.push(*r);
                    }
                }
                open.insert(port, EgressRun { port, priority: prio, t_first: e.time, t_last: e.time, count: 1 });
            }
            EventClass::RunEnd if run_mode => {
                if let Some(mut r) = open.remove(&port) {
                    r.t_last = e.aux.map_or(r.t_first, |a| a as u64);
                    r.count = e.frame_id.unwrap_or(1);
                    out.push(r);
                }
            }
            _ => {}
        }
    }
    out.extend(open.into_values());
    out.sort_by_key(|r| (r.t_first, r.port));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Overlap {
    pub start: u64,
    pub end: u64,
    pub port: u16,
    pub priorities: SmallVec<[u8; 2]>,
}

/// Marks runs on the same port that interleave as `A, B, A`; returns the
/// flag per run and the merged episodes.
fn interleavings(runs: &[EgressRun]) -> (Vec<bool>, Vec<Overlap>) {
    let mut flagged = vec![false; runs.len()];
    let mut episodes: Vec<Overlap> = Vec::new();
    let mut by_port: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for (i, r) in runs.iter().enumerate() {
        by_port.entry(r.port).or_default().push(i);
    }
    for (port, idx) in by_port {
        let mut current: Option<Overlap> = None;
        for w in idx.windows(3) {
            let (a, b, c) = (&runs[w[0]], &runs[w[1]], &runs[w[2]]);
            if a.priority == c.priority && a.priority != b.priority {
                for &i in w {
                    flagged[i] = true;
                }
                match &mut current {
                    Some(o) if a.t_first <= o.end => {
                        o.end = o.end.max(c.t_first);
                        for p in [a.priority, b.priority] {
                            if !o.priorities.contains(&p) {
                                o.priorities.push(p);
                            }
                        }
                    }
                    _ => {
                        episodes.extend(current.take());
                        let priorities = SmallVec::from_slice(&[a.priority, b.priority]);
                        current = Some(Overlap { start: a.t_last, end: c.t_first, port, priorities });
                    }
                }
            }
        }
        episodes.extend(current);
    }
    episodes.sort_by_key(|o| (o.start, o.port));
    (flagged, episodes)
}

/// Intervals in which frames of two priorities interleave at the sink.
pub fn detect_overlap(trace: &Trace) -> Vec<Overlap> {
    interleavings(&egress_runs(trace)).1
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceRun {
    pub run: EgressRun,
    /// Cycle of the first period slot in which the run started.
    pub cycle: Option<usize>,
    pub deviation: i64,
    pub overlapped: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SliceReport {
    pub d: u64,
    pub runs: Vec<SliceRun>,
    /// Runs of fewer than two frames, left unmeasured.
    pub skipped_short: usize,
    /// Final run of each port, whose end the trace never shows.
    pub unterminated: usize,
    pub overlaps: usize,
    pub by_priority: BTreeMap<u8, DelaySeries>,
    pub all: DelaySeries,
}

impl SliceReport {
    /// Sum of deviations and number of measured runs per cycle.
    pub fn cycle_sums(&self) -> BTreeMap<usize, (i64, usize)> {
        let mut sums: BTreeMap<usize, (i64, usize)> = BTreeMap::new();
        for r in self.runs.iter().filter(|r| !r.overlapped) {
            if let Some(c) = r.cycle {
                let e = sums.entry(c).or_default();
                e.0 += r.deviation;
                e.1 += 1;
            }
        }
        sums
    }
}

/// Entry-duration deviation `t_last - t_first - d` for every run of at least
/// two frames that is followed by a change of priority; runs taking part in
/// an interleaving are flagged and excluded from the series.
pub fn measure_slice_deviation(trace: &Trace, d: u64) -> SliceReport {
    let completions: Vec<u64> = trace.of(EventClass::Completion).filter(|e| e.port.unwrap_or(0) == 0).map(|e| e.time).collect();
    let runs = egress_runs(trace);
    let (flags, episodes) = interleavings(&runs);
    let mut last: BTreeMap<u16, usize> = BTreeMap::new();
    for (i, r) in runs.iter().enumerate() {
        last.insert(r.port, i);
    }
    let mut report = SliceReport { d, overlaps: episodes.len(), ..Default::default() };
    let mut all = Vec::new();
    for (i, (run, overlapped)) in runs.into_iter().zip(flags).enumerate() {
        if run.count < 2 {
            report.skipped_short += 1;
            continue;
        }
        if last.get(&run.port) == Some(&i) {
            report.unterminated += 1;
            continue;
        }
        let deviation = run.duration() as i64 - d as i64;
        let pos = completions.partition_point(|&t| t <= run.t_first);
        let cycle = pos.checked_sub(1);
        if !overlapped {
            all.push(deviation);
            report
                .by_priority
                .entry(run.priority)
                .or_insert_with(|| DelaySeries::new(format!("delta_slice_p{}", run.priority), Vec::new()))
                .values
                .push(deviation);
        }
        report.runs.push(SliceRun { run, cycle, deviation, overlapped });
    }
    report.all = DelaySeries::new("delta_slice", all);
    report
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistFormat {
    Histogram,
    Ccdf,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    /// `(bin_start, count, fraction)` for every non-empty bin.
    Histogram(Vec<(i64, u64, f64)>),
    /// `(value, P(X > value))`, starting one below the minimum.
    Ccdf(Vec<(i64, f64)>),
}

impl Distribution {
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        match self {
            Distribution::Histogram(rows) => {
                writeln!(out, "bin_start,count,normalized")?;
                for (b, c, f) in rows {
                    writeln!(out, "{b},{c},{f:.6}")?;
                }
            }
            Distribution::Ccdf(rows) => {
                writeln!(out, "value,ccdf")?;
                for (v, p) in rows {
                    writeln!(out, "{v},{p:.6}")?;
                }
            }
        }
        out.flush()
    }
}

pub fn emit_distribution(series: &DelaySeries, format: DistFormat, bin_width: u64) -> Distribution {
    match format {
        DistFormat::Histogram => {
            let n = series.len().max(1) as f64;
            let rows = histogram(&series.values, bin_width)
                .into_iter()
                .filter(|&(_, c)| c > 0)
                .map(|(b, c)| (b, c, c as f64 / n))
                .collect();
            Distribution::Histogram(rows)
        }
        DistFormat::Ccdf => {
            let mut v = series.values.clone();
            v.sort_unstable();
            let n = v.len() as f64;
            let mut rows = Vec::new();
            if let Some(&min) = v.first() {
                rows.push((min - 1, 1.0));
            }
            let mut i = 0;
            while i < v.len() {
                let x = v[i];
                while i < v.len() && v[i] == x {
                    i += 1;
                }
                rows.push((x, (v.len() - i) as f64 / n));
            }
            Distribution::Ccdf(rows)
        }
    }
}

/// Dense histogram `(bin_start, count)` from the minimum to the maximum bin.
pub fn histogram(values: &[i64], bin_width: u64) -> Vec<(i64, u64)> {
    let w = bin_width.max(1) as i64;
    let (Some(&lo), Some(&hi)) = (values.iter().min(), values.iter().max()) else {
        return Vec::new();
    };
    let first = lo.div_euclid(w);
    let last = hi.div_euclid(w);
    let mut counts = vec![0u64; (last - first + 1) as usize];
    for &v in values {
        counts[(v.div_euclid(w) - first) as usize] += 1;
    }
    counts.into_iter().enumerate().map(|(i, c)| ((first + i as i64) * w, c)).collect()
}

/// Fraction of the global maximum a peak needs to count as a dominant mode.
pub const DOMINANT_MODE_FRACTION: f64 = 0.25;
/// A valley must stay below this fraction of the smaller of its two modes.
pub const VALLEY_FRACTION: f64 = 0.6;

#[derive(Clone, Debug, PartialEq)]
pub struct Bimodality {
    pub bin_width: u64,
    /// Centers and counts of the two separated modes, lower first.
    pub modes: Option<[(f64, u64); 2]>,
    pub valley: Option<(f64, u64)>,
    pub passes: bool,
}

/// Looks for two dominant local maxima of the histogram, one below and one
/// above zero, with a valley between them below `VALLEY_FRACTION` of the
/// smaller one.
pub fn bimodality(series: &DelaySeries, bin_width: u64) -> Bimodality {
    let hist = histogram(&series.values, bin_width);
    let center = |b: i64| b as f64 + bin_width as f64 / 2.0;
    let global = hist.iter().map(|h| h.1).max().unwrap_or(0);
    let peaks: Vec<usize> = (0..hist.len())
        .filter(|&i| {
            let c = hist[i].1;
            let left = if i == 0 { 0 } else { hist[i - 1].1 };
            let right = hist.get(i + 1).map_or(0, |h| h.1);
            c > left && c >= right && c as f64 >= DOMINANT_MODE_FRACTION * global as f64
        })
        .collect();
    let mut best: Option<(usize, usize, usize)> = None;
    for (x, &a) in peaks.iter().enumerate() {
        for &b in &peaks[x + 1..] {
            if !(center(hist[a].0) < 0.0 && center(hist[b].0) > 0.0) {
                continue;
            }
            let v = (a + 1..b).min_by_key(|&i| hist[i].1);
            let Some(v) = v else { continue };
            let smaller = hist[a].1.min(hist[b].1);
            if (hist[v].1 as f64) < VALLEY_FRACTION * smaller as f64 {
                let score = hist[a].1 + hist[b].1;
                if best.map_or(true, |(p, q, _)| score > hist[p].1 + hist[q].1) {
                    best = Some((a, b, v));
                }
            }
        }
    }
    match best {
        Some((a, b, v)) => Bimodality {
            bin_width,
            modes: Some([(center(hist[a].0), hist[a].1), (center(hist[b].0), hist[b].1)]),
            valley: Some((center(hist[v].0), hist[v].1)),
            passes: true,
        },
        None => Bimodality { bin_width, modes: None, valley: None, passes: false },
    }
}

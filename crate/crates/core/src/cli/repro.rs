// SPDX-License-Identifier: Apache-2.0

//! The reproduction experiments behind `repro`.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::presets;
use crate::engine::{self, Scenario, ScenarioError, Trace};
use crate::measure::{
    detect_overlap, measure_queue_delay, measure_slice_deviation, measure_tg, ControlGapCounter, DelaySeries, SliceReport,
};
use crate::schedule::{insert_gsis, Gcl, GsiMode};
use crate::tcam::{compile_tgcl_with, sgcl_bound, tgcl_bound, CompileOptions, TailEncoding, DEFAULT_KEY_WIDTH, SGCL_CAPACITY, TGCL_CAPACITY};

/// Ternary entry count reported for the 8 × 50 µs list with 30 ns GSIs.
pub const REFERENCE_TGCL_ENTRIES: usize = 1512;
/// Median slice deviation reported for the same setup, in ns.
pub const REFERENCE_SLICE_MEDIAN_NS: i64 = -19;
/// GSI durations of the overlap sweep.
pub const OVERLAP_GSIS: [u64; 7] = [0, 5, 10, 15, 20, 30, 40];

fn scaled(full: bool) -> u64 {
    if full {
        presets::FULL_NS
    } else {
        presets::SCALED_NS
    }
}

pub fn tg_accuracy(seed: u64, full: bool) -> Result<DelaySeries, ScenarioError> {
    let mut s = presets::tg_accuracy(seed);
    if full {
        s.duration = (presets::TG_FULL_COMPLETIONS + 1) * s.tgcls[0].period();
    }
    Ok(measure_tg(&engine::run(&s)?))
}

pub fn queue_delay(seed: u64, full: bool) -> Result<DelaySeries, ScenarioError> {
    let mut s = presets::queue_delay(seed);
    s.duration = scaled(full);
    Ok(measure_queue_delay(&engine::run(&s)?))
}

/// Streams the control gaps into a histogram, so the full run stays small.
pub fn control_delay(seed: u64, full: bool) -> Result<ControlGapCounter, ScenarioError> {
    let mut s = presets::control_delay(seed);
    s.duration = scaled(full);
    let mut c = ControlGapCounter::default();
    engine::run_with_sink(&s, &mut c)?;
    Ok(c)
}

pub fn slice(gsi: u64, seed: u64, full: bool) -> Result<(Scenario, Trace, SliceReport), ScenarioError> {
    let mut s = presets::testbed(gsi, seed);
    s.duration = scaled(full);
    let trace = engine::run(&s)?;
    let r = measure_slice_deviation(&trace, s.data_entry_duration(0, 0));
    Ok((s, trace, r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OverlapPoint {
    pub gsi: u64,
    pub seed: u64,
    pub overlaps: usize,
}

/// Overlap count of the testbed for every GSI of `gsis` and every seed.
pub fn overlap_sweep(gsis: &[u64], seeds: &[u64], duration: u64) -> Result<Vec<OverlapPoint>, ScenarioError> {
    let jobs: Vec<(u64, u64)> = gsis.iter().flat_map(|&g| seeds.iter().map(move |&s| (g, s))).collect();
    jobs.par_iter()
        .map(|&(gsi, seed)| {
            let mut s = presets::testbed(gsi, seed);
            s.duration = duration;
            Ok(OverlapPoint { gsi, seed, overlaps: detect_overlap(&engine::run(&s)?).len() })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountRow {
    pub mode: GsiMode,
    pub tail: TailEncoding,
    pub count: usize,
}

/// Compiled tGCL size of `base` with GSIs under both GSI modes and both
/// period-tail encodings.
pub fn count_matrix(base: &Gcl, gsi: u64, width: u32) -> Vec<CountRow> {
    let mut rows = Vec::new();
    for mode in [GsiMode::ShrinkEntries, GsiMode::ExtendPeriod] {
        for tail in [TailEncoding::Period, TailEncoding::ClampToMax] {
            let Ok(g) = insert_gsis(base, gsi, mode) else { continue };
            let opts = CompileOptions { width, capacity: None, tail };
            if let Ok(t) = compile_tgcl_with(&g, &opts) {
                rows.push(CountRow { mode, tail, count: t.len() });
            }
        }
    }
    rows
}

pub fn mode_name(m: GsiMode) -> &'static str {
    match m {
        GsiMode::ShrinkEntries => "shrink",
        GsiMode::ExtendPeriod => "extend",
    }
}

pub fn tail_name(t: TailEncoding) -> &'static str {
    match t {
        TailEncoding::Period => "period",
        TailEncoding::ClampToMax => "clamp",
    }
}

/// The count matrix against the reference count, closest variant first
/// named, with the reason a residual can remain.
pub fn count_matrix_text(rows: &[CountRow], entries: usize, width: u32) -> String {
    let mut t = String::new();
    let bound = tgcl_bound(entries, width);
    let _ = writeln!(t, "reference count {REFERENCE_TGCL_ENTRIES}, worst-case bound {bound}");
    let _ = writeln!(t, "gsi_mode,tail,entries,delta");
    for r in rows {
        let _ = writeln!(
            t,
            "{},{},{},{:+}",
            mode_name(r.mode),
            tail_name(r.tail),
            r.count,
            r.count as i64 - REFERENCE_TGCL_ENTRIES as i64
        );
    }
    if let Some(best) = rows.iter().min_by_key(|r| (r.count as i64 - REFERENCE_TGCL_ENTRIES as i64).abs()) {
        let delta = best.count as i64 - REFERENCE_TGCL_ENTRIES as i64;
        let _ = write!(t, "closest: {} / {} with delta {delta:+}", mode_name(best.mode), tail_name(best.tail));
        if delta != 0 {
            t.push_str(
                "\n  the residual depends on how the hardware splits the period tail and\n  \
                 the guard intervals into ranges, which the reference count does not pin down",
            );
        }
    }
    t
}

/// Table sizes of rotation lists of growing length, with the worst-case
/// bounds and what fits the hardware tables.
pub fn scalability_text() -> String {
    let w = DEFAULT_KEY_WIDTH;
    let mut t = String::new();
    let base = Gcl::rotation(0, presets::TESTBED_ENTRIES, presets::TESTBED_ENTRY_NS);
    t.push_str(&count_matrix_text(&count_matrix(&base, presets::TESTBED_GSI_NS, w), 2 * presets::TESTBED_ENTRIES, w));
    let _ = writeln!(t, "\n\nlist_entries,period_ns,tgcl_entries,bound,fits");
    for n in [1usize, 2, 4, 8, 16, 32, 64, 128] {
        let g = Gcl::rotation(0, n, 400_000 / n as u64);
        let Ok(g) = insert_gsis(&g, presets::TESTBED_GSI_NS, GsiMode::ExtendPeriod) else { continue };
        let count = compile_tgcl_with(&g, &CompileOptions { width: w, capacity: None, tail: TailEncoding::Period }).map_or(0, |m| m.len());
        let _ = writeln!(t, "{},{},{},{},{}", g.len(), g.period(), count, tgcl_bound(g.len(), w), count <= TGCL_CAPACITY);
    }
    let per_t = tgcl_bound(1, w);
    let per_s = sgcl_bound(1, w);
    let _ = write!(
        t,
        "\nworst case: {} tGCL entries fit {TGCL_CAPACITY} ({per_t} each), {} sGCL entries fit {SGCL_CAPACITY} ({per_s} each)",
        TGCL_CAPACITY / per_t,
        SGCL_CAPACITY / per_s
    );
    t
}

/// Seeds drawn for a repro run starting at `seed`.
pub fn seeds(seed: u64, n: u64) -> Vec<u64> {
    (seed..seed + n).collect()
}

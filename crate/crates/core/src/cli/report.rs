// SPDX-License-Identifier: Apache-2.0

//! Metric files recomputed from a trace.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::engine::{Scenario, Trace};
use crate::measure::{
    bimodality, detect_overlap, emit_distribution, measure_control_delay, measure_queue_delay, measure_slice_deviation,
    measure_tg, DelaySeries, DistFormat, SliceReport,
};

/// Histogram bin of every slice distribution, in ns.
pub const SLICE_BIN_NS: u64 = 3;

/// Writes the per-metric CSVs and `summary.txt` into `dir`; returns the
/// summary text.
pub fn write_report(trace: &Trace, scenario: &Scenario, dir: &Path) -> io::Result<String> {
    std::fs::create_dir_all(dir)?;
    let tg = measure_tg(trace);
    let queue = measure_queue_delay(trace);
    let control = measure_control_delay(trace);
    let d = scenario.data_entry_duration(0, 0);
    let slice = measure_slice_deviation(trace, d);

    for s in [&tg, &queue, &control] {
        s.write_csv(File::create(dir.join(format!("{}.csv", s.name)))?)?;
    }
    write_slice_runs(&slice, File::create(dir.join("delta_slice.csv"))?)?;
    for (format, name) in [(DistFormat::Histogram, "delta_slice_hist.csv"), (DistFormat::Ccdf, "delta_slice_ccdf.csv")] {
        emit_distribution(&slice.all, format, SLICE_BIN_NS).write_csv(File::create(dir.join(name))?)?;
    }
    let mut out = BufWriter::new(File::create(dir.join("overlaps.csv"))?);
    writeln!(out, "start_ns,end_ns,port,priorities")?;
    for o in detect_overlap(trace) {
        let p: Vec<String> = o.priorities.iter().map(u8::to_string).collect();
        writeln!(out, "{},{},{},{}", o.start, o.end, o.port, p.join(" "))?;
    }
    out.flush()?;

    let end = trace.events.last().map_or(0, |e| e.time);
    let text = summary_text(&scenario.name, end, &[&tg, &queue, &control], &slice);
    std::fs::write(dir.join("summary.txt"), &text)?;
    Ok(text)
}

fn write_slice_runs<W: Write>(r: &SliceReport, out: W) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "port,priority,cycle,t_first_ns,t_last_ns,frames,deviation_ns,overlapped")?;
    for s in &r.runs {
        let cycle = s.cycle.map_or(String::new(), |c| c.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.run.port, s.run.priority, cycle, s.run.t_first, s.run.t_last, s.run.count, s.deviation, s.overlapped
        )?;
    }
    out.flush()
}

/// Summary of the series and the slice report of a trace ending at `end` ns.
pub fn summary_text(name: &str, end: u64, series: &[&DelaySeries], slice: &SliceReport) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "scenario {name}, trace ends at {end} ns");
    for s in series {
        match s.summary() {
            Some(sum) => writeln!(t, "{}: {sum}", s.name),
            None => writeln!(t, "{}: no samples", s.name),
        }
        .expect("string write");
    }
    let _ = writeln!(t, "{}", slice_text(slice));
    t
}

pub fn slice_text(slice: &SliceReport) -> String {
    let mut t = String::new();
    let _ = write!(t, "delta_slice (d = {} ns): ", slice.d);
    match slice.all.summary() {
        Some(sum) => {
            let _ = write!(t, "{sum}");
        }
        None => t.push_str("no samples"),
    }
    let _ = write!(
        t,
        "\n  runs {} unmeasured {} unterminated {} overlaps {}",
        slice.runs.len(),
        slice.skipped_short,
        slice.unterminated,
        slice.overlaps
    );
    let b = bimodality(&slice.all, SLICE_BIN_NS);
    match b.modes {
        Some([lo, hi]) => {
            let _ = write!(t, "\n  modes {:.1} ns ({}) and {:.1} ns ({})", lo.0, lo.1, hi.0, hi.1);
            if let Some(v) = b.valley {
                let _ = write!(t, ", valley {:.1} ns ({})", v.0, v.1);
            }
        }
        None => t.push_str("\n  no pair of separated modes"),
    }
    let _ = write!(t, "\n  bimodal: {}", if b.passes { "yes" } else { "no" });
    t
}

// SPDX-License-Identifier: Apache-2.0

//! Runs the 400 us testbed schedule and summarizes entry-duration deviations.
//!
//! `cargo run --release --example testbed_simulation -- [gsi_ns [seed]]`

use std::time::Instant;

use tas_sim::cli::{presets, report};
use tas_sim::engine;
use tas_sim::measure::measure_slice_deviation;

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("integer argument"));
    let gsi = args.next().unwrap_or(presets::TESTBED_GSI_NS);
    let seed = args.next().unwrap_or(1);
    let s = presets::testbed(gsi, seed);
    let t0 = Instant::now();
    let trace = engine::run(&s).unwrap();
    println!("{} ns simulated, {} trace events in {:.1?}", s.duration, trace.events.len(), t0.elapsed());
    let r = measure_slice_deviation(&trace, s.data_entry_duration(0, 0));
    println!("{}", report::slice_text(&r));
    let sums = r.cycle_sums();
    let worst = sums.values().filter(|(_, n)| *n == presets::TESTBED_ENTRIES).map(|(s, _)| s.abs()).max();
    println!("  largest |sum of deviations| over a complete cycle: {worst:?} ns");
}

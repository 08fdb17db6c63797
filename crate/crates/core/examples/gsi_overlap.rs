// SPDX-License-Identifier: Apache-2.0

//! Counts interleaved egress runs of the testbed for growing GSIs.
//!
//! `cargo run --release --example gsi_overlap -- [duration_ns [seeds]]`

use tas_sim::cli::repro;

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("integer argument"));
    let duration = args.next().unwrap_or(20_000_000);
    let seeds = repro::seeds(1, args.next().unwrap_or(2));
    let points = repro::overlap_sweep(&repro::OVERLAP_GSIS, &seeds, duration).unwrap();
    println!("gsi_ns {}", seeds.iter().map(|s| format!("seed{s:<3}")).collect::<String>());
    for gsi in repro::OVERLAP_GSIS {
        let row: String = points.iter().filter(|p| p.gsi == gsi).map(|p| format!("{:<7}", p.overlaps)).collect();
        println!("{gsi:<6} {row}");
    }
}

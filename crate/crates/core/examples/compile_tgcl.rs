// SPDX-License-Identifier: Apache-2.0

//! Compiles the 8 x 50 us rotation with 30 ns GSIs and prints the table
//! size under every GSI mode and tail encoding, then the first rows.

use tas_sim::cli::{presets, repro};
use tas_sim::schedule::{insert_gsis, Gcl, GsiMode};
use tas_sim::tcam::{compile_tgcl, write_table_csv, DEFAULT_KEY_WIDTH};

fn main() {
    let base = Gcl::rotation(0, presets::TESTBED_ENTRIES, presets::TESTBED_ENTRY_NS);
    let rows = repro::count_matrix(&base, presets::TESTBED_GSI_NS, DEFAULT_KEY_WIDTH);
    println!("{}\n", repro::count_matrix_text(&rows, 2 * base.len(), DEFAULT_KEY_WIDTH));

    let g = insert_gsis(&base, presets::TESTBED_GSI_NS, GsiMode::ExtendPeriod).unwrap();
    let table = compile_tgcl(&g, DEFAULT_KEY_WIDTH).unwrap();
    let mut csv = Vec::new();
    write_table_csv(&table, &mut csv).unwrap();
    for line in String::from_utf8(csv).unwrap().lines().take(12) {
        println!("{line}");
    }
    println!("... {} rows", table.len());
}

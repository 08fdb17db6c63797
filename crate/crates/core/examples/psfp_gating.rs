// SPDX-License-Identifier: Apache-2.0

//! Stream gating at ingress: a 100 us window in every 400 us, checked through
//! the list, the compiled table and a full run of the bundled scenario.

use std::path::Path;

use tas_sim::cli::load_scenario;
use tas_sim::dataplane::{psfp_gate, psfp_gate_mat};
use tas_sim::engine;
use tas_sim::tcam::compile_sgcl;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/psfp_window.scenario");
    let s = load_scenario(&path).unwrap();
    let sgcl = &s.sgcls[0];
    let id = sgcl.gate_id().unwrap();
    let table = compile_sgcl(sgcl, s.key_width).unwrap();
    println!("sGCL {id}: {} list entries, {} table entries", sgcl.len(), table.len());
    for rel in [0, 99_999, 100_000, 399_999, 450_000] {
        println!("  rel {rel:>6}: list {:?}, table {:?}", psfp_gate(sgcl, rel), psfp_gate_mat(&table, id, rel, sgcl.period()));
    }

    let mut sink = tas_sim::engine::Trace::default();
    let stats = engine::run_with_sink(&s, &mut sink).unwrap();
    println!(
        "{} ns run: {} frames, {} dropped before queuing, {} sent, {} still queued",
        s.duration, stats.generated, stats.psfp_dropped, stats.transmitted, stats.residual
    );
}

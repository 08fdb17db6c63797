// SPDX-License-Identifier: Apache-2.0

//! Expands a few timestamp ranges into ternary prefixes.
//!
//! `cargo run --example range_to_ternary -- [lo hi [width]]`

use tas_sim::tcam::range_to_prefixes;

fn show(lo: u64, hi: u64, w: u32) {
    let p = range_to_prefixes(lo, hi, w).expect("range inside the key domain");
    println!("[{lo}, {hi}] in {w} bits: {} prefixes (at most {})", p.len(), (2 * w - 2).max(1));
    for q in &p {
        let (a, b) = q.bounds(w);
        println!("  {}  covers {a}..={b}", q.to_ternary_string(w));
    }
}

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if let [lo, hi, rest @ ..] = args.as_slice() {
        show(*lo, *hi, rest.first().map_or(48, |&w| w as u32));
        return;
    }
    show(3, 12, 4);
    show(1, 14, 4);
    show(0, 49_999, 16);
    show(50_000, 50_029, 48);
}

// SPDX-License-Identifier: Apache-2.0

//! Relative timestamps against period-completion frames, and what a lookup
//! sees when the next completion comes late.

use tas_sim::schedule::{insert_gsis, Gcl, GsiMode};
use tas_sim::tcam::{compile_tgcl, TernaryKey};
use tas_sim::timing::{delta_tg, relative_timestamp, PeriodReference, Timestamp};

fn main() {
    let g = insert_gsis(&Gcl::rotation(0, 8, 50_000), 30, GsiMode::ExtendPeriod).unwrap();
    let h = g.period();
    let table = compile_tgcl(&g, 48).unwrap();

    let completions = [0, h - 11, 2 * h - 11 + 7, 3 * h + 5];
    for w in completions.windows(2) {
        println!("period {} ns, delta_tg {:+} ns", w[1] - w[0], delta_tg(Timestamp(w[1]), Timestamp(w[0]), h));
    }

    let mut reference = PeriodReference::new(Timestamp(completions[1]), h);
    for t in [completions[1] + 120_000, completions[1] + h - 1, completions[1] + h + 40] {
        let rel = relative_timestamp(Timestamp(t), &reference).unwrap();
        let clamped = rel.min(h - 1);
        let (i, e) = g.entry_at(rel).unwrap();
        let open: Vec<u8> = (0..8).filter(|&q| e.gates().unwrap().is_open(q)).collect();
        let q0 = table.lookup(&TernaryKey::tgcl(clamped, 0, 0)).map(|m| m.action);
        println!("t={t} rel={rel} clamped={clamped}: entry {i}, open {open:?}, queue 0 {q0:?}");
    }
    reference.complete(Timestamp(completions[2]));
    println!("after the next completion: rel {}", relative_timestamp(Timestamp(completions[2] + 10), &reference).unwrap());
}

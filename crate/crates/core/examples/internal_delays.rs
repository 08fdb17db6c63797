// SPDX-License-Identifier: Apache-2.0

//! Measures the three internal delays of a gate transition on short runs of
//! the default models.

use tas_sim::cli::presets;
use tas_sim::engine;
use tas_sim::measure::{measure_queue_delay, measure_tg, ControlGapCounter};
use tas_sim::timing::internal_delay_total;

fn main() {
    let duration = 20_000_000;
    let mut s = presets::tg_accuracy(1);
    s.duration = duration;
    let tg = measure_tg(&engine::run(&s).unwrap()).summary().unwrap();
    println!("delta_tg      {tg}");

    let mut s = presets::queue_delay(1);
    s.duration = duration;
    let queue = measure_queue_delay(&engine::run(&s).unwrap()).summary().unwrap();
    println!("delta_queue   {queue}");

    let mut s = presets::control_delay(1);
    s.duration = duration;
    let mut gaps = ControlGapCounter::default();
    engine::run_with_sink(&s, &mut gaps).unwrap();
    let control = gaps.summary().unwrap();
    println!("delta_control {control}");

    let worst = internal_delay_total(tg.max.abs().max(tg.min.abs()), queue.max, control.max);
    println!("worst-case internal delay of one transition: {worst} ns");
}

// SPDX-License-Identifier: Apache-2.0

//! Table sizes of growing gate control lists against the hardware budgets.

fn main() {
    println!("{}", tas_sim::cli::repro::scalability_text());
}

// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(tas_sim::cli::main(std::env::args_os()));
}

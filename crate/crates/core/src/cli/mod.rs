// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: scenario files, subcommands and the
//! reproduction experiments.

mod file;
pub mod presets;
pub mod report;
pub mod repro;

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

pub use file::*;

use crate::engine::{self, CsvSink, Trace};
use crate::schedule::Gcl;
use crate::tcam::{compile_tgcl_with, tgcl_bound, write_table_csv, CompileOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Caps the worker threads of fanned-out experiments.
pub const THREADS_ENV: &str = "TAS_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "tas-sim", version, about = "Time-aware shaper simulator and TCAM schedule compiler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario file; silent on success.
    Validate { scenario: PathBuf },
    /// Compile the match tables and report their sizes.
    Compile {
        scenario: PathBuf,
        /// Directory for the table CSVs.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Run a scenario and write its trace.
    Simulate {
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated time in ns, overriding the file.
        #[arg(long)]
        duration: Option<u64>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Recompute every metric from a trace.
    Report {
        trace: PathBuf,
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Run one of the reproduction experiments.
    Repro {
        #[arg(value_enum)]
        experiment: Experiment,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Long campaign durations instead of the 100 ms desk scale.
        #[arg(long)]
        full: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    TgAccuracy,
    QueueDelay,
    ControlDelay,
    SliceGsi,
    SliceNogsi,
    Overlap,
    Scalability,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<engine::ScenarioError> for Failure {
    fn from(e: engine::ScenarioError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Parses `argv` (program name first) and runs the command; returns the
/// process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let (Failure::Invalid(m) | Failure::Runtime(m)) = &f;
            eprintln!("error: {m}");
            f.code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Validate { scenario } => {
            load_scenario(&scenario)?;
            Ok(())
        }
        Command::Compile { scenario, out, format: _ } => compile(&scenario, out.as_deref()),
        Command::Simulate { scenario, out, seed, duration, format: _ } => simulate(&scenario, &out, seed, duration),
        Command::Report { trace, scenario, out, format: _ } => {
            let s = load_scenario(&scenario)?;
            let t = Trace::read_csv_file(&trace).map_err(|e| Failure::Invalid(format!("{}: {e}", trace.display())))?;
            print!("{}", report::write_report(&t, &s, &out)?);
            Ok(())
        }
        Command::Repro { experiment, seed, full, out, format: _ } => run_repro(experiment, seed, full, out.as_deref()),
    }
}

fn compile(path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let s = load_scenario(path)?;
    let c = s.compile()?;
    for (g, base) in c.tgcls.iter().zip(&s.tgcls) {
        let port = g.port().unwrap_or(0);
        let opts = CompileOptions { width: s.key_width, capacity: None, tail: s.tail };
        let n = compile_tgcl_with(g, &opts).map_or(0, |m| m.len());
        println!("tGCL port {port}: {} list entries, {n} ternary entries (bound {})", g.len(), tgcl_bound(g.len(), s.key_width));
        let testbed = Gcl::rotation(port, presets::TESTBED_ENTRIES, presets::TESTBED_ENTRY_NS);
        if *base == testbed && s.gsi.duration == presets::TESTBED_GSI_NS {
            let rows = repro::count_matrix(base, s.gsi.duration, s.key_width);
            println!("{}", repro::count_matrix_text(&rows, g.len(), s.key_width));
        }
    }
    println!("tGCL table: {} of {} entries", c.tgcl_mat.len(), s.capacities.tgcl);
    println!("sGCL table: {} of {} entries", c.sgcl_mat.len(), s.capacities.sgcl);
    println!("stream table: {} of {} entries", c.stream_table.len(), s.capacities.stream);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let csv_err = |e: csv::Error| Failure::Runtime(e.to_string());
        write_table_csv(&c.tgcl_mat, File::create(dir.join("tgcl.csv"))?).map_err(csv_err)?;
        write_table_csv(&c.sgcl_mat, File::create(dir.join("sgcl.csv"))?).map_err(csv_err)?;
    }
    Ok(())
}

fn simulate(path: &Path, out: &Path, seed: Option<u64>, duration: Option<u64>) -> Result<(), Failure> {
    let mut s = load_scenario(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(d) = duration {
        s.duration = d;
    }
    std::fs::create_dir_all(out)?;
    let mut sink = CsvSink::new(BufWriter::new(File::create(out.join("trace.csv"))?))?;
    let stats = engine::run_with_sink(&s, &mut sink)?;
    sink.finish()?;
    println!(
        "generated {} transmitted {} miss-dropped {} psfp-dropped {} tail-dropped {} residual {}",
        stats.generated, stats.transmitted, stats.miss_dropped, stats.psfp_dropped, stats.tail_dropped, stats.residual
    );
    Ok(())
}

/// Rayon pool honouring [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool, rayon::ThreadPoolBuildError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        b = b.num_threads(n);
    }
    b.build()
}

fn write_series(out: Option<&Path>, s: &crate::measure::DelaySeries) -> Result<(), Failure> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        s.write_csv(File::create(dir.join(format!("{}.csv", s.name)))?)?;
    }
    Ok(())
}

fn print_series(s: &crate::measure::DelaySeries) {
    match s.summary() {
        Some(sum) => println!("{}: {sum}", s.name),
        None => println!("{}: no samples", s.name),
    }
}

fn run_repro(exp: Experiment, seed: u64, full: bool, out: Option<&Path>) -> Result<(), Failure> {
    match exp {
        Experiment::TgAccuracy => {
            let s = repro::tg_accuracy(seed, full)?;
            print_series(&s);
            write_series(out, &s)
        }
        Experiment::QueueDelay => {
            let s = repro::queue_delay(seed, full)?;
            print_series(&s);
            write_series(out, &s)
        }
        Experiment::ControlDelay => {
            let c = repro::control_delay(seed, full)?;
            match c.summary() {
                Some(sum) => println!("delta_control: {sum}"),
                None => println!("delta_control: no samples"),
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(dir)?;
                let mut w = csv::Writer::from_path(dir.join("delta_control_hist.csv")).map_err(|e| Failure::Runtime(e.to_string()))?;
                let rows = std::iter::once(["gap_ns".to_string(), "count".to_string()])
                    .chain(c.counts.iter().map(|(g, n)| [g.to_string(), n.to_string()]));
                for r in rows {
                    w.write_record(r).map_err(|e| Failure::Runtime(e.to_string()))?;
                }
                w.flush()?;
            }
            Ok(())
        }
        Experiment::SliceGsi | Experiment::SliceNogsi => {
            let gsi = if exp == Experiment::SliceGsi { presets::TESTBED_GSI_NS } else { 0 };
            let (s, trace, r) = repro::slice(gsi, seed, full)?;
            println!("gsi {gsi} ns, seed {seed}");
            println!("{}", report::slice_text(&r));
            if let Some(m) = r.all.summary() {
                println!("  median {:.1} ns against reference {} ns", m.median, repro::REFERENCE_SLICE_MEDIAN_NS);
            }
            if let Some(dir) = out {
                report::write_report(&trace, &s, dir)?;
            }
            Ok(())
        }
        Experiment::Overlap => {
            let seeds = repro::seeds(seed, if full { 5 } else { 1 });
            let pool = thread_pool().map_err(|e| Failure::Runtime(e.to_string()))?;
            let duration = if full { presets::FULL_NS } else { presets::SCALED_NS };
            let points = pool.install(|| repro::overlap_sweep(&repro::OVERLAP_GSIS, &seeds, duration))?;
            println!("gsi_ns,seed,overlaps");
            for p in &points {
                println!("{},{},{}", p.gsi, p.seed, p.overlaps);
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(dir)?;
                let text: String = std::iter::once("gsi_ns,seed,overlaps\n".to_string())
                    .chain(points.iter().map(|p| format!("{},{},{}\n", p.gsi, p.seed, p.overlaps)))
                    .collect();
                std::fs::write(dir.join("overlaps.csv"), text)?;
            }
            Ok(())
        }
        Experiment::Scalability => {
            let text = repro::scalability_text();
            println!("{text}");
            if let Some(dir) = out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("scalability.txt"), text + "\n")?;
            }
            Ok(())
        }
    }
}

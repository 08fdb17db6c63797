// SPDX-License-Identifier: Apache-2.0

//! Trace records and their CSV form.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

pub const TRACE_HEADER: &str = "time_ns,event,port,queue,priority,stream,frame_id,aux";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventClass {
    /// Period-completion frame; `port` is the period slot, `aux` its period.
    Completion,
    /// Control frame; `aux` is the clamped relative time it was matched at.
    Control,
    /// Gate update written; `aux` is the delay until it takes effect.
    WriteOpen,
    WriteClose,
    /// Gate update in effect; `aux` is the queue depth at that instant.
    GateOpen,
    GateClose,
    Arrival,
    MissDrop,
    PsfpDrop,
    TailDrop,
    Enqueue,
    Dequeue,
    /// Frame fully received by the sink at `time`; `aux` is its dequeue time.
    Egress,
    /// Closes an egress run; `frame_id` is the run length, `aux` the time of
    /// its last frame.
    RunEnd,
    /// Frames left in a queue at the end; `aux` is the count.
    Residual,
}

impl EventClass {
    pub const ALL: [EventClass; 15] = [
        EventClass::Completion,
        EventClass::Control,
        EventClass::WriteOpen,
        EventClass::WriteClose,
        EventClass::GateOpen,
        EventClass::GateClose,
        EventClass::Arrival,
        EventClass::MissDrop,
        EventClass::PsfpDrop,
        EventClass::TailDrop,
        EventClass::Enqueue,
        EventClass::Dequeue,
        EventClass::Egress,
        EventClass::RunEnd,
        EventClass::Residual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventClass::Completion => "completion",
            EventClass::Control => "control",
            EventClass::WriteOpen => "write-open",
            EventClass::WriteClose => "write-close",
            EventClass::GateOpen => "gate-open",
            EventClass::GateClose => "gate-close",
            EventClass::Arrival => "arrival",
            EventClass::MissDrop => "miss-drop",
            EventClass::PsfpDrop => "psfp-drop",
            EventClass::TailDrop => "tail-drop",
            EventClass::Enqueue => "enqueue",
            EventClass::Dequeue => "dequeue",
            EventClass::Egress => "egress",
            EventClass::RunEnd => "run-end",
            EventClass::Residual => "residual",
        }
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventClass::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown trace event class {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub time: u64,
    pub event: EventClass,
    pub port: Option<u16>,
    pub queue: Option<u8>,
    pub priority: Option<u8>,
    pub stream: Option<u32>,
    pub frame_id: Option<u64>,
    pub aux: Option<i64>,
}

impl TraceEvent {
    pub fn new(time: u64, event: EventClass) -> Self {
        TraceEvent { time, event, port: None, queue: None, priority: None, stream: None, frame_id: None, aux: None }
    }

    pub fn port(mut self, p: u16) -> Self {
        self.port = Some(p);
        self
    }

    pub fn queue(mut self, q: u8) -> Self {
        self.queue = Some(q);
        self
    }

    pub fn priority(mut self, p: u8) -> Self {
        self.priority = Some(p);
        self
    }

    pub fn stream(mut self, s: Option<u32>) -> Self {
        self.stream = s;
        self
    }

    pub fn frame(mut self, id: u64) -> Self {
        self.frame_id = Some(id);
        self
    }

    pub fn aux(mut self, a: i64) -> Self {
        self.aux = Some(a);
        self
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(out, "{},{},", self.time, self.event)?;
        opt(out, self.port)?;
        out.write_all(b",")?;
        opt(out, self.queue)?;
        out.write_all(b",")?;
        opt(out, self.priority)?;
        out.write_all(b",")?;
        opt(out, self.stream)?;
        out.write_all(b",")?;
        opt(out, self.frame_id)?;
        out.write_all(b",")?;
        opt(out, self.aux)?;
        out.write_all(b"\n")
    }
}

fn opt<W: Write, T: fmt::Display>(out: &mut W, v: Option<T>) -> io::Result<()> {
    match v {
        Some(v) => write!(out, "{v}"),
        None => Ok(()),
    }
}

/// Consumer of trace events, in time order.
pub trait TraceSink {
    fn record(&mut self, ev: TraceEvent);
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl TraceSink for Trace {
    fn record(&mut self, ev: TraceEvent) {
        debug_assert!(self.events.last().map_or(true, |l| l.time <= ev.time), "trace out of order");
        self.events.push(ev);
    }
}

impl Trace {
    pub fn of(&self, class: EventClass) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.event == class)
    }

    pub fn count(&self, class: EventClass) -> usize {
        self.of(class).count()
    }

    pub fn is_time_ordered(&self) -> bool {
        self.events.windows(2).all(|w| w[0].time <= w[1].time)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut sink = CsvSink::new(out)?;
        for e in &self.events {
            sink.record(*e);
        }
        sink.finish()
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Trace, TraceReadError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
        if header != TRACE_HEADER {
            return Err(TraceReadError::Header(header));
        }
        let mut events = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            let event = row.event.parse().map_err(|m| TraceReadError::Row { line: i + 2, message: m })?;
            events.push(TraceEvent {
                time: row.time_ns,
                event,
                port: row.port,
                queue: row.queue,
                priority: row.priority,
                stream: row.stream,
                frame_id: row.frame_id,
                aux: row.aux,
            });
        }
        Ok(Trace { events })
    }

    pub fn read_csv_file(path: &std::path::Path) -> Result<Trace, TraceReadError> {
        let f = std::fs::File::open(path).map_err(|e| TraceReadError::Io(e.to_string()))?;
        Trace::read_csv(io::BufReader::new(f))
    }
}

#[derive(Deserialize)]
struct Row {
    time_ns: u64,
    event: String,
    port: Option<u16>,
    queue: Option<u8>,
    priority: Option<u8>,
    stream: Option<u32>,
    frame_id: Option<u64>,
    aux: Option<i64>,
}

#[derive(Debug, Error)]
pub enum TraceReadError {
    #[error("trace header {0:?} does not match the expected columns")]
    Header(String),
    #[error("trace row at line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("trace read failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace read failed: {0}")]
    Io(String),
}

/// Streams events to CSV as they are produced.
pub struct CsvSink<W: Write> {
    out: io::BufWriter<W>,
    error: Option<io::Error>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W) -> io::Result<Self> {
        let mut out = io::BufWriter::with_capacity(1 << 16, out);
        writeln!(out, "{TRACE_HEADER}")?;
        Ok(CsvSink { out, error: None })
    }

    pub fn finish(mut self) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()
    }
}

impl<W: Write> TraceSink for CsvSink<W> {
    fn record(&mut self, ev: TraceEvent) {
        if self.error.is_none() {
            if let Err(e) = ev.write_csv(&mut self.out) {
                self.error = Some(e);
            }
        }
    }
}

/// Fans events out to two sinks.
pub struct Tee<'a, A: TraceSink, B: TraceSink>(pub &'a mut A, pub &'a mut B);

impl<A: TraceSink, B: TraceSink> TraceSink for Tee<'_, A, B> {
    fn record(&mut self, ev: TraceEvent) {
        self.0.record(ev);
        self.1.record(ev);
    }
}

//! Event traces and their replay.
//!
//! A trace is a CSV-like text file:
//!
//! ```text
//! # ffpack trace v1
//! event,clock,kind,arg,start
//! 0,0,ARR,2,0
//! 1,0.0132,ARR,1,2
//! 2,0.0412,DEP,0,
//! ```
//!
//! `ARR` records carry the item type (1 or 2) and the placement start; `DEP`
//! records carry the id of the departing item and no start. Item ids are the
//! 0-based ordinal of the item's `ARR` record. Items present at time 0 are
//! written as `ARR` records at clock 0, in start order.

use std::fmt;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{ModelError, OutputError};
use crate::model::{Configuration, ItemId, ItemKind};
use crate::sim::{simulate, DeltaRecord, EventKind, Observer, RunResult, SimState};

pub const TRACE_MAGIC: &str = "# ffpack trace v1";
pub const TRACE_HEADER: &str = "event,clock,kind,arg,start";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TraceKind {
    Arr,
    Dep,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub event_index: u64,
    pub clock: f64,
    pub kind: TraceKind,
    /// Item type for arrivals, item id for departures.
    pub arg: u64,
    pub start: Option<usize>,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            TraceKind::Arr => "ARR",
            TraceKind::Dep => "DEP",
        };
        write!(f, "{},{},{},{},", self.event_index, self.clock, kind, self.arg)?;
        if let Some(start) = self.start {
            write!(f, "{start}")?;
        }
        Ok(())
    }
}

impl TraceRecord {
    pub fn from_delta(event_index: u64, delta: &DeltaRecord) -> Self {
        match delta.event.kind {
            EventKind::Arrival(kind) => TraceRecord {
                event_index,
                clock: delta.event.at,
                kind: TraceKind::Arr,
                arg: kind.number() as u64,
                start: Some(delta.start),
            },
            EventKind::Departure(id) => TraceRecord {
                event_index,
                clock: delta.event.at,
                kind: TraceKind::Dep,
                arg: id.0,
                start: None,
            },
        }
    }

    pub fn parse(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(format!("expected 5 fields, found {}", fields.len()));
        }
        let event_index = fields[0]
            .parse()
            .map_err(|_| format!("bad event index {:?}", fields[0]))?;
        let clock: f64 = fields[1]
            .parse()
            .map_err(|_| format!("bad clock {:?}", fields[1]))?;
        if !(clock.is_finite() && clock >= 0.0) {
            return Err(format!("clock must be a non-negative number, got {clock}"));
        }
        let arg = fields[3]
            .parse()
            .map_err(|_| format!("bad argument {:?}", fields[3]))?;
        let (kind, start) = match fields[2] {
            "ARR" => {
                ItemKind::from_number(arg).ok_or_else(|| format!("unknown item type {arg}"))?;
                let start = fields[4]
                    .parse()
                    .map_err(|_| format!("bad placement start {:?}", fields[4]))?;
                (TraceKind::Arr, Some(start))
            }
            "DEP" => {
                if !fields[4].is_empty() {
                    return Err("departures carry no placement start".into());
                }
                (TraceKind::Dep, None)
            }
            other => return Err(format!("unknown record kind {other:?}")),
        };
        Ok(TraceRecord { event_index, clock, kind, arg, start })
    }
}

/// Observer writing one trace line per applied event.
pub struct TraceWriter<W: Write> {
    out: W,
    next_index: u64,
    error: Option<std::io::Error>,
}

impl<W: Write> TraceWriter<W> {
    /// Writes the header and the initial items of `config`.
    pub fn start(mut out: W, config: &Configuration) -> Result<Self, OutputError> {
        check_replayable(config)?;
        writeln!(out, "{TRACE_MAGIC}")?;
        writeln!(out, "{TRACE_HEADER}")?;
        let mut next_index = 0;
        for item in config.items_by_start() {
            let record = TraceRecord {
                event_index: next_index,
                clock: 0.0,
                kind: TraceKind::Arr,
                arg: item.kind.number() as u64,
                start: Some(item.start),
            };
            writeln!(out, "{record}")?;
            next_index += 1;
        }
        Ok(Self { out, next_index, error: None })
    }

    pub fn records(&self) -> u64 {
        self.next_index
    }

    pub fn finish(mut self) -> Result<W, OutputError> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> Observer for TraceWriter<W> {
    fn observe(&mut self, _state: &SimState, _hold: f64) {}

    fn on_delta(&mut self, _state: &SimState, delta: &DeltaRecord) {
        if self.error.is_some() {
            return;
        }
        let record = TraceRecord::from_delta(self.next_index, delta);
        self.next_index += 1;
        if let Err(e) = writeln!(self.out, "{record}") {
            self.error = Some(e);
        }
    }
}

/// The initial items must be what first-fit produces when they arrive in
/// start order, with ids equal to their start-order ordinal.
fn check_replayable(config: &Configuration) -> Result<(), ModelError> {
    let mut rebuilt = Configuration::new();
    for (ordinal, item) in config.items_by_start().into_iter().enumerate() {
        let (id, start) = rebuilt.place_first_fit(item.kind);
        if start != item.start || id != ItemId(ordinal as u64) || item.id != id {
            return Err(ModelError::InvalidParams(format!(
                "initial configuration is not a first-fit arrival sequence (item at {})",
                item.start
            )));
        }
    }
    Ok(())
}

/// Runs `state` to `horizon`, writing the trace to `out`.
pub fn record_trace<W: Write>(state: SimState, horizon: f64, out: W) -> Result<(RunResult, W), OutputError> {
    let mut writer = TraceWriter::start(out, state.config())?;
    let result = simulate(state, horizon, &mut [&mut writer]);
    Ok((result, writer.finish()?))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub line: usize,
    pub event_index: u64,
    pub expected: usize,
    pub recomputed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceFault {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub records: u64,
    pub arrivals: u64,
    pub departures: u64,
    pub mismatches: Vec<Mismatch>,
    /// Set when replay stopped at a malformed or inconsistent record.
    pub fault: Option<TraceFault>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty() && self.fault.is_none()
    }
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} records ({} arrivals, {} departures), {} placement mismatches",
            self.records,
            self.arrivals,
            self.departures,
            self.mismatches.len()
        )?;
        for m in &self.mismatches {
            writeln!(
                f,
                "line {}: event {} placed at {} in trace, first-fit gives {}",
                m.line, m.event_index, m.expected, m.recomputed
            )?;
        }
        if let Some(fault) = &self.fault {
            writeln!(f, "line {}: {}", fault.line, fault.message)?;
        }
        write!(f, "{}", if self.is_clean() { "CLEAN" } else { "FAILED" })
    }
}

/// Re-executes a trace on an empty configuration using a plain first-fit
/// scan and compares every recorded placement with the recomputed one.
pub fn replay_trace<R: BufRead>(input: R) -> ReplayReport {
    let mut report = ReplayReport::default();
    let mut config = Configuration::new();
    let mut last: Option<(u64, f64)> = None;
    for (n, line) in input.lines().enumerate() {
        let line_no = n + 1;
        let fault = |message: String| Some(TraceFault { line: line_no, message });
        let line = match line {
            Ok(line) => line,
            Err(e) => {
                report.fault = fault(format!("read error: {e}"));
                break;
            }
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed == TRACE_HEADER {
            continue;
        }
        let record = match TraceRecord::parse(trimmed) {
            Ok(record) => record,
            Err(message) => {
                report.fault = fault(message);
                break;
            }
        };
        if let Some((index, clock)) = last {
            if record.event_index <= index {
                report.fault = fault(format!("event index {} does not increase", record.event_index));
                break;
            }
            if record.clock < clock {
                report.fault = fault(format!("clock {} goes backwards", record.clock));
                break;
            }
        }
        last = Some((record.event_index, record.clock));
        report.records += 1;
        match record.kind {
            TraceKind::Arr => {
                let kind = ItemKind::from_number(record.arg).expect("checked by parse");
                let (_, start) = config.place_first_fit(kind);
                report.arrivals += 1;
                let expected = record.start.expect("arrivals carry a start");
                if expected != start {
                    report.mismatches.push(Mismatch {
                        line: line_no,
                        event_index: record.event_index,
                        expected,
                        recomputed: start,
                    });
                }
            }
            TraceKind::Dep => {
                if let Err(e) = config.remove_item(ItemId(record.arg)) {
                    report.fault = fault(e.to_string());
                    break;
                }
                report.departures += 1;
            }
        }
    }
    report
}

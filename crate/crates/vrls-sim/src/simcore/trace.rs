//! Line-delimited per-transmission trace and the independent PRR recount.
//!
//! One line per (transmission, receiver) pair. Distances print in shortest
//! round-trip form, so a recount from the file reproduces the accumulator's
//! sums exactly.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::mobility::VehicleId;
use crate::simcore::{
    PrrAccumulator, ReceiverRecord, ReceptionResult, TransmissionOutcome, WindowCounts,
};
use crate::SimError;

pub const TRACE_HEADER: &str = "time_ms,tx,tb,receiver,distance_m,result";

pub struct TraceWriter {
    w: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{TRACE_HEADER}")?;
        Ok(TraceWriter { w })
    }

    pub fn record(&mut self, outcome: &TransmissionOutcome) -> std::io::Result<()> {
        for r in &outcome.receivers {
            writeln!(
                self.w,
                "{},{},{},{},{},{}",
                outcome.time_ms,
                outcome.tx.0,
                outcome.tb,
                r.receiver.0,
                r.distance_m,
                r.result.as_str()
            )?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.w.flush()
    }
}

/// Recomputes per-window PRR counts from a trace stream. Returns one entry
/// per window from index 0 through the last window touched by a record; the
/// final entry covers a possibly partial window.
pub fn recount_trace<R: BufRead>(
    reader: R,
    bins: &[(f64, f64)],
    window_ms: u64,
) -> Result<Vec<WindowCounts>, SimError> {
    let mut acc = PrrAccumulator::new(bins);
    let mut out: Vec<WindowCounts> = Vec::new();
    let mut current_window = 0u64;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line != TRACE_HEADER {
                return Err(SimError::Config(format!("bad trace header: {line}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(SimError::Config(format!(
                "trace line {} has {} fields",
                lineno + 1,
                fields.len()
            )));
        }
        let bad = |what: &str| SimError::Config(format!("trace line {}: bad {what}", lineno + 1));
        let time_ms: u64 = fields[0].parse().map_err(|_| bad("time"))?;
        let tx: u64 = fields[1].parse().map_err(|_| bad("tx"))?;
        let tb: usize = fields[2].parse().map_err(|_| bad("tb"))?;
        let receiver: u64 = fields[3].parse().map_err(|_| bad("receiver"))?;
        let distance_m: f64 = fields[4].parse().map_err(|_| bad("distance"))?;
        let result = ReceptionResult::parse(fields[5]).ok_or_else(|| bad("result"))?;

        let window = time_ms / window_ms;
        while current_window < window {
            out.push(acc.take());
            current_window += 1;
        }
        acc.observe(&TransmissionOutcome {
            time_ms,
            tx: VehicleId(tx),
            tb,
            receivers: vec![ReceiverRecord {
                receiver: VehicleId(receiver),
                distance_m,
                result,
            }],
        });
    }
    out.push(acc.take());
    Ok(out)
}

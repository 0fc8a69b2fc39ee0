//! Metrics serialization: a pretty-printed JSON document with the full
//! metrics tree, and an optional CSV of the per-interval timeseries for
//! spreadsheet-friendly plotting.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::metrics::SimMetrics;

/// Writes the metrics document as pretty JSON (with a trailing newline, so
/// files concatenate and diff cleanly).
pub fn write_json(metrics: &SimMetrics, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, metrics)?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Renders the metrics document to a JSON string (same bytes `write_json`
/// produces, minus the file).
pub fn to_json_string(metrics: &SimMetrics) -> String {
    let mut s = serde_json::to_string_pretty(metrics).expect("metrics serialize infallibly");
    s.push('\n');
    s
}

/// Writes the per-interval timeseries as CSV.
pub fn write_csv(metrics: &SimMetrics, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "cycle_start,requests,slow_accesses,slow_ratio,migrations")?;
    for s in &metrics.timeseries {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.cycle_start, s.requests, s.slow_accesses, s.slow_ratio, s.migrations
        )?;
    }
    w.flush()
}

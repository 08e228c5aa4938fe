//! Convergence traces as two-column CSV: `iteration,objective`, one row per
//! iteration starting at 1.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{DispatchError, Result};
use crate::solver::ConvergenceTrace;

pub const TRACE_HEADER: &str = "iteration,objective";

pub fn write_trace<W: Write>(trace: &ConvergenceTrace, mut out: W) -> Result<()> {
    if trace.is_empty() {
        return Err(DispatchError::invalid("trace", "nothing to export"));
    }
    writeln!(out, "{TRACE_HEADER}")?;
    for (i, value) in trace.values().iter().enumerate() {
        // `{}` on f64 prints the shortest representation that parses back exactly.
        writeln!(out, "{},{}", i + 1, value)?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_trace(trace: &ConvergenceTrace, path: impl AsRef<Path>) -> Result<()> {
    write_trace(trace, BufWriter::new(File::create(path)?))
}

pub fn parse_trace(text: &str) -> Result<ConvergenceTrace> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == TRACE_HEADER => {}
        _ => {
            return Err(DispatchError::Parse {
                line: 1,
                column: 1,
                message: format!("expected header `{TRACE_HEADER}`"),
            })
        }
    }
    let mut values = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| DispatchError::Parse {
            line: i + 1,
            column: 1,
            message,
        };
        let (iter, value) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("expected two columns, got `{line}`")))?;
        let iter: usize = iter
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad iteration `{iter}`")))?;
        if iter != values.len() + 1 {
            return Err(bad(format!("iteration {iter} out of sequence")));
        }
        values.push(
            value
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad objective `{value}`")))?,
        );
    }
    Ok(ConvergenceTrace::new(values))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<ConvergenceTrace> {
    parse_trace(&std::fs::read_to_string(path)?)
}

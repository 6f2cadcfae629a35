//! Per-step gradient-pathway trace logs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "step,grad_in,grad_out,loss";

/// One training step: L2 norms of the input- and output-pathway gradients on
/// the embedding matrix, and the mean loss in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub grad_in: f64,
    pub grad_out: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    pub rows: Vec<TraceRow>,
}

impl TraceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn steps_strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].step < w[1].step)
    }

    /// Shortest round-trip decimal formatting, so parsing is lossless.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(32 * (self.rows.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(out, "{},{:?},{:?},{:?}", r.step, r.grad_in, r.grad_out, r.loss).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == TRACE_HEADER => {}
            Some((_, h)) => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header `{TRACE_HEADER}`, found {h:?}"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "missing header".into(),
                })
            }
        }
        let mut log = TraceLog::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            log.push(parse_row(line).map_err(|msg| Error::Parse { line: idx + 1, msg })?);
        }
        Ok(log)
    }
}

fn parse_row(line: &str) -> std::result::Result<TraceRow, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    }
    let step = fields[0]
        .parse()
        .map_err(|_| format!("bad step {:?}", fields[0]))?;
    let num = |name: &str, s: &str| -> std::result::Result<f64, String> {
        let v: f64 = s.parse().map_err(|_| format!("bad {name} {s:?}"))?;
        if !v.is_finite() {
            return Err(format!("non-finite {name}"));
        }
        Ok(v)
    };
    let grad_in = num("grad_in", fields[1])?;
    let grad_out = num("grad_out", fields[2])?;
    let loss = num("loss", fields[3])?;
    if grad_in < 0.0 || grad_out < 0.0 {
        return Err("negative gradient norm".into());
    }
    Ok(TraceRow {
        step,
        grad_in,
        grad_out,
        loss,
    })
}

pub fn write_trace(log: &TraceLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, log.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<TraceLog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TraceLog::parse(&text)
}

//! Per-round metrics records and their CSV form.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// One worker's record for one round. Missing values serialize as empty
/// CSV fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub t: usize,
    pub worker: usize,
    pub loss: Option<f64>,
    pub grad_norm_sq: Option<f64>,
    /// `‖e_t‖² / d`.
    pub mse: f64,
    /// Measured frame body size: payload plus value bits.
    pub frame_bits: u64,
    /// Analytic bits per component.
    pub analytic_bits: Option<f64>,
    pub trace_v: Option<f64>,
    pub trace_u: Option<f64>,
    pub trace_uq: Option<f64>,
    pub trace_rhat: Option<f64>,
}

pub const CSV_HEADER: &str =
    "t,worker,loss,grad_norm_sq,mse,frame_bits,analytic_bits,trace_v,trace_u,trace_uq,trace_rhat";

/// Write `rows` as CSV with a header row and LF line endings.
pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Render `rows` as a CSV string.
pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

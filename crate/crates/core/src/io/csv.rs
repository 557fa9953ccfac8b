//! Trace curves as CSV with a fixed header.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trace::{Trace, TraceRecord};

pub const TRACE_HEADER: [&str; 15] = [
    "k", "l", "step", "F", "f", "f_reg", "grad_norm", "dist_x", "wall_ms", "calls_gFy", "calls_gfy", "calls_gFx",
    "calls_gfx", "calls_hvp", "calls_jvp",
];

/// One CSV line of a trace. Second-order columns count analytic and
/// finite-difference products together.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub l: usize,
    pub step: usize,
    pub upper: f64,
    pub lower: f64,
    pub f_reg: Option<f64>,
    pub grad_norm: f64,
    pub dist_x: Option<f64>,
    pub wall_ms: f64,
    pub calls_grad_upper_y: u64,
    pub calls_grad_lower_y: u64,
    pub calls_grad_upper_x: u64,
    pub calls_grad_lower_x: u64,
    pub calls_hvp: u64,
    pub calls_jvp: u64,
}

impl From<&TraceRecord> for TraceRow {
    fn from(r: &TraceRecord) -> Self {
        let c = &r.counters;
        Self {
            k: r.k,
            l: r.l,
            step: r.step,
            upper: r.upper,
            lower: r.lower,
            f_reg: r.f_reg,
            grad_norm: r.grad_norm,
            dist_x: r.dist_x,
            wall_ms: r.wall_ms,
            calls_grad_upper_y: c.grad_upper_y,
            calls_grad_lower_y: c.grad_lower_y,
            calls_grad_upper_x: c.grad_upper_x,
            calls_grad_lower_x: c.grad_lower_x,
            calls_hvp: c.hvp + c.hvp_fd,
            calls_jvp: c.jvp + c.jvp_fd,
        }
    }
}

/// 17 significant digits, exact for every `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

impl TraceRow {
    fn fields(&self) -> [String; 15] {
        [
            self.k.to_string(),
            self.l.to_string(),
            self.step.to_string(),
            format_f64(self.upper),
            format_f64(self.lower),
            opt(self.f_reg),
            format_f64(self.grad_norm),
            opt(self.dist_x),
            format_f64(self.wall_ms),
            self.calls_grad_upper_y.to_string(),
            self.calls_grad_lower_y.to_string(),
            self.calls_grad_upper_x.to_string(),
            self.calls_grad_lower_x.to_string(),
            self.calls_hvp.to_string(),
            self.calls_jvp.to_string(),
        ]
    }
}

pub fn write_trace_csv_to<W: Write>(trace: &Trace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record(TraceRow::from(r).fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(trace: &Trace, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_csv_to(trace, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

fn bad(line: u64, msg: String) -> Error {
    Error::Spec {
        line: line as usize,
        column: 1,
        message: msg,
    }
}

pub fn read_trace_csv_from<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd.headers().map_err(|e| bad(1, e.to_string()))?;
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(bad(1, format!("unexpected trace header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let int = |i: usize| -> Result<u64> {
            rec[i].parse().map_err(|_| bad(line, format!("column {} expects an integer", TRACE_HEADER[i])))
        };
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| bad(line, format!("column {} expects a number", TRACE_HEADER[i])))
        };
        let maybe = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        rows.push(TraceRow {
            k: int(0)? as usize,
            l: int(1)? as usize,
            step: int(2)? as usize,
            upper: num(3)?,
            lower: num(4)?,
            f_reg: maybe(5)?,
            grad_norm: num(6)?,
            dist_x: maybe(7)?,
            wall_ms: num(8)?,
            calls_grad_upper_y: int(9)?,
            calls_grad_lower_y: int(10)?,
            calls_grad_upper_x: int(11)?,
            calls_grad_lower_x: int(12)?,
            calls_hvp: int(13)?,
            calls_jvp: int(14)?,
        });
    }
    Ok(rows)
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace_csv_from(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_header_only() {
        let mut buf = Vec::new();
        write_trace_csv_to(&Trace::default(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", TRACE_HEADER.join(",")));
    }

    #[test]
    fn awkward_floats_round_trip() {
        for v in [0.1, -0.0, 5e-324, f64::MAX, 1.0 / 3.0, -2.2250738585072014e-308] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn bad_header_rejected() {
        assert!(read_trace_csv_from("k,l\n1,2\n".as_bytes()).is_err());
    }
}

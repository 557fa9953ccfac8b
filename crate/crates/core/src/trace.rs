//! Per-iteration run records shared by all solvers.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::counters::OracleCounters;
use crate::linalg::{distance, norm};
use crate::problems::Problem;
use crate::scalar::Scalar;

/// Vectors longer than this are stored as their first [`X_HEAD`] coordinates plus the norm.
pub const X_FULL_MAX: usize = 64;
pub const X_HEAD: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub l: usize,
    /// Cumulative x-updates, `k·L + l + 1`.
    pub step: usize,
    pub x: Vec<f64>,
    pub x_norm: f64,
    pub x_truncated: bool,
    #[serde(rename = "F")]
    pub upper: f64,
    #[serde(rename = "f")]
    pub lower: f64,
    pub f_reg: Option<f64>,
    pub grad_norm: f64,
    pub dist_x: Option<f64>,
    pub dist_y: Option<f64>,
    pub dist_ll: Option<f64>,
    pub wall_ms: f64,
    pub counters: OracleCounters,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Non-fatal diagnostics, e.g. negative curvature met by CG.
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

/// Builds a [`Trace`] while a run progresses.
#[derive(Debug)]
pub struct Recorder {
    trace: Trace,
    started: Instant,
    record_every: usize,
    wall_clock: bool,
    total_steps: usize,
}

/// Iterate and derived quantities at one x-update.
pub struct Snapshot<'a, T> {
    pub k: usize,
    pub l: usize,
    pub step: usize,
    pub x: &'a [T],
    pub y: &'a [T],
    pub f_reg: Option<T>,
    pub grad: &'a [T],
}

impl Recorder {
    pub fn new(record_every: usize, wall_clock: bool, total_steps: usize) -> Self {
        Self {
            trace: Trace::default(),
            started: Instant::now(),
            record_every: record_every.max(1),
            wall_clock,
            total_steps,
        }
    }

    pub fn warn(&mut self, message: String) {
        if !self.trace.warnings.contains(&message) {
            self.trace.warnings.push(message);
        }
    }

    /// Records `snap` when its step is a multiple of `record_every` or the last step.
    /// Objective values are computed outside the oracle counters.
    pub fn record<T: Scalar>(&mut self, problem: &dyn Problem<T>, snap: Snapshot<'_, T>, counters: &OracleCounters) {
        if snap.step % self.record_every != 0 && snap.step != self.total_steps {
            return;
        }
        let known = problem.known_optimum();
        let m = snap.x.len();
        let x_truncated = m > X_FULL_MAX;
        let keep = if x_truncated { X_HEAD } else { m };
        let wall_ms = if self.wall_clock {
            self.started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        self.trace.records.push(TraceRecord {
            k: snap.k,
            l: snap.l,
            step: snap.step,
            x: snap.x[..keep].iter().map(|v| v.as_f64()).collect(),
            x_norm: norm(snap.x).as_f64(),
            x_truncated,
            upper: problem.upper(snap.x, snap.y).as_f64(),
            lower: problem.lower(snap.x, snap.y).as_f64(),
            f_reg: snap.f_reg.map(|v| v.as_f64()),
            grad_norm: norm(snap.grad).as_f64(),
            dist_x: known.as_ref().map(|o| distance(snap.x, &o.x).as_f64()),
            dist_y: known.as_ref().map(|o| distance(snap.y, &o.y).as_f64()),
            dist_ll: problem.ll_set_distance(snap.x, snap.y).map(|v| v.as_f64()),
            wall_ms,
            counters: *counters,
        });
    }

    pub fn finish(self) -> Trace {
        self.trace
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }
}

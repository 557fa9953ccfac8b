//! Run configuration, trace CSV and JSON reports, and spec execution.

mod csv;
mod report;
mod runspec;

pub use self::csv::{format_f64, read_trace_csv, read_trace_csv_from, write_trace_csv, write_trace_csv_to, TraceRow, TRACE_HEADER};
pub use report::{
    platform, read_report_json, spec_hash, to_sorted_json, write_report_json, RunReport, VERSION,
};
pub use runspec::{keys_help, parse_runspec, KeyDoc, Method, Precision, RunSpec, KEYS, SCHEMA_VERSION};

use crate::baselines::run_baseline;
use crate::bvfim::{run, RunFailure, RunOutput};
use crate::counters::OracleCounters;
use crate::error::Error;
use crate::linalg::distance;
use crate::scalar::Scalar;
use crate::trace::Trace;

/// Outcome of [`execute`], converted to `f64`. On failure the iterates and
/// trace are those reached before the error.
#[derive(Debug, Clone)]
pub struct Executed {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
    pub dist_x: Option<f64>,
    pub dist_y: Option<f64>,
    pub trace: Trace,
    pub counters: OracleCounters,
    pub error: Option<Error>,
}

fn execute_as<T: Scalar>(spec: &RunSpec) -> Executed {
    let lit = |v: &Vec<f64>| v.iter().map(|&a| T::lit(a)).collect::<Vec<T>>();
    let problem = match spec.problem.build_with_fd::<T>(spec.fd_second_order) {
        Ok(p) => p,
        Err(error) => {
            return Executed {
                x: spec.x0.clone().unwrap_or_default(),
                y: spec.y0.clone().unwrap_or_default(),
                upper: None,
                lower: None,
                dist_x: None,
                dist_y: None,
                trace: Trace::default(),
                counters: OracleCounters::default(),
                error: Some(error),
            }
        }
    };
    let (sx, sy) = problem.suggested_start(spec.seed);
    let x0 = spec.x0.as_ref().map_or(sx, lit);
    let y0 = spec.y0.as_ref().map_or(sy, lit);
    let out: Result<RunOutput<T>, Box<RunFailure<T>>> = match spec.baseline() {
        None => run(&*problem, &spec.schedule, &spec.solver, x0, y0),
        Some(b) => run_baseline(&*problem, &b, &spec.baseline_config(), x0, y0),
    };
    let (x, y, trace, counters, error) = match out {
        Ok(o) => (o.x, o.y, o.trace, o.counters, None),
        Err(f) => {
            let f = *f;
            (f.x, f.y, f.trace, f.counters, Some(f.error))
        }
    };
    let shapes_ok = x.len() == problem.dim_x() && y.len() == problem.dim_y();
    let known = problem.known_optimum();
    let f64s = |v: &[T]| v.iter().map(|a| a.as_f64()).collect::<Vec<f64>>();
    Executed {
        upper: shapes_ok.then(|| problem.upper(&x, &y).as_f64()),
        lower: shapes_ok.then(|| problem.lower(&x, &y).as_f64()),
        dist_x: known.as_ref().filter(|_| shapes_ok).map(|o| distance(&x, &o.x).as_f64()),
        dist_y: known.as_ref().filter(|_| shapes_ok).map(|o| distance(&y, &o.y).as_f64()),
        x: f64s(&x),
        y: f64s(&y),
        trace,
        counters,
        error,
    }
}

/// Runs the solver named by `spec` at its precision, from `x0`/`y0` or the
/// problem's suggested start for `seed`.
pub fn execute(spec: &RunSpec) -> Executed {
    match spec.precision {
        Precision::F64 => execute_as::<f64>(spec),
        Precision::F32 => execute_as::<f32>(spec),
    }
}

//! Per-run oracle-call accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::problems::Problem;
use crate::scalar::Scalar;

/// Call counts for every oracle of a [`Problem`].
///
/// Second-order products served by a finite-difference wrapper are counted
/// separately from analytic ones (`hvp_fd`, `jvp_fd`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCounters {
    pub eval_upper: u64,
    pub eval_lower: u64,
    pub grad_upper_x: u64,
    pub grad_upper_y: u64,
    pub grad_lower_x: u64,
    pub grad_lower_y: u64,
    pub hvp: u64,
    pub jvp: u64,
    pub hvp_fd: u64,
    pub jvp_fd: u64,
    /// Rejected trial points in the barrier line search.
    pub backtracks: u64,
    /// Barrier solves ended early because `y` sat on the barrier floor.
    #[serde(default)]
    pub floor_stops: u64,
}

impl OracleCounters {
    pub fn second_order_total(&self) -> u64 {
        self.hvp + self.jvp + self.hvp_fd + self.jvp_fd
    }

    pub fn first_order_total(&self) -> u64 {
        self.eval_upper
            + self.eval_lower
            + self.grad_upper_x
            + self.grad_upper_y
            + self.grad_lower_x
            + self.grad_lower_y
    }

    /// Componentwise `self - earlier`.
    pub fn since(&self, earlier: &OracleCounters) -> OracleCounters {
        OracleCounters {
            eval_upper: self.eval_upper - earlier.eval_upper,
            eval_lower: self.eval_lower - earlier.eval_lower,
            grad_upper_x: self.grad_upper_x - earlier.grad_upper_x,
            grad_upper_y: self.grad_upper_y - earlier.grad_upper_y,
            grad_lower_x: self.grad_lower_x - earlier.grad_lower_x,
            grad_lower_y: self.grad_lower_y - earlier.grad_lower_y,
            hvp: self.hvp - earlier.hvp,
            jvp: self.jvp - earlier.jvp,
            hvp_fd: self.hvp_fd - earlier.hvp_fd,
            jvp_fd: self.jvp_fd - earlier.jvp_fd,
            backtracks: self.backtracks - earlier.backtracks,
            floor_stops: self.floor_stops - earlier.floor_stops,
        }
    }
}

/// A problem paired with the counters of the run that queries it.
///
/// Every call is counted and its output checked for NaN/Inf.
pub(crate) struct Oracle<'a, T: Scalar> {
    pub problem: &'a dyn Problem<T>,
    pub counters: &'a mut OracleCounters,
}

fn finite_scalar<T: Scalar>(v: T, quantity: &'static str, context: &'static str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { quantity, context })
    }
}

fn finite_vec<T: Scalar>(v: Vec<T>, quantity: &'static str, context: &'static str) -> Result<Vec<T>> {
    if all_finite(&v) {
        Ok(v)
    } else {
        Err(Error::NonFinite { quantity, context })
    }
}

impl<'a, T: Scalar> Oracle<'a, T> {
    pub fn new(problem: &'a dyn Problem<T>, counters: &'a mut OracleCounters) -> Self {
        Self { problem, counters }
    }

    pub fn upper(&mut self, x: &[T], y: &[T], ctx: &'static str) -> Result<T> {
        self.counters.eval_upper += 1;
        finite_scalar(self.problem.upper(x, y), "F", ctx)
    }

    pub fn lower(&mut self, x: &[T], y: &[T], ctx: &'static str) -> Result<T> {
        self.counters.eval_lower += 1;
        finite_scalar(self.problem.lower(x, y), "f", ctx)
    }

    pub fn upper_grad_x(&mut self, x: &[T], y: &[T], ctx: &'static str) -> Result<Vec<T>> {
        self.counters.grad_upper_x += 1;
        finite_vec(self.problem.upper_grad_x(x, y), "grad_x F", ctx)
    }

    pub fn upper_grad_y(&mut self, x: &[T], y: &[T], ctx: &'static str) -> Result<Vec<T>> {
        self.counters.grad_upper_y += 1;
        finite_vec(self.problem.upper_grad_y(x, y), "grad_y F", ctx)
    }

    pub fn lower_grad_x(&mut self, x: &[T], y: &[T], ctx: &'static str) -> Result<Vec<T>> {
        self.counters.grad_lower_x += 1;
        finite_vec(self.problem.lower_grad_x(x, y), "grad_x f", ctx)
    }

    pub fn lower_grad_y(&mut self, x: &[T], y: &[T], ctx: &'static str) -> Result<Vec<T>> {
        self.counters.grad_lower_y += 1;
        finite_vec(self.problem.lower_grad_y(x, y), "grad_y f", ctx)
    }

    pub fn hvp(&mut self, x: &[T], y: &[T], v: &[T], method: &'static str) -> Result<Vec<T>> {
        if self.problem.second_order_is_fd() {
            self.counters.hvp_fd += 1;
        } else {
            self.counters.hvp += 1;
        }
        let out = self
            .problem
            .lower_hvp_yy(x, y, v)
            .ok_or(Error::MissingSecondOrder { method })?;
        finite_vec(out, "Hessian-vector product", method)
    }

    pub fn jvp(&mut self, x: &[T], y: &[T], v: &[T], method: &'static str) -> Result<Vec<T>> {
        if self.problem.second_order_is_fd() {
            self.counters.jvp_fd += 1;
        } else {
            self.counters.jvp += 1;
        }
        let out = self
            .problem
            .lower_jvp_xy(x, y, v)
            .ok_or(Error::MissingSecondOrder { method })?;
        finite_vec(out, "Jacobian-vector product", method)
    }
}

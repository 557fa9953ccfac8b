use super::adam::AdamParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterOptimizer {
    Gd,
    Adam(AdamParams),
}

/// Tunables of the outer loop and both inner solves.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Gradient steps on the regularized lower level.
    pub t_z: usize,
    /// Accepted gradient steps on the barrier problem.
    pub t_y: usize,
    /// x-updates per stage.
    pub l: usize,
    /// Outer stages.
    pub k: usize,
    pub s1: f64,
    pub s2: f64,
    /// x step size. Zero freezes x.
    pub alpha: f64,
    pub optimizer: OuterOptimizer,
    /// Start every barrier solve from `z` instead of the previous `y`.
    pub warm_start_y: bool,
    /// Minimum accepted `f_reg - f(x, y)`.
    pub barrier_floor: f64,
    /// Step halvings allowed per barrier step.
    pub backtrack_max: usize,
    /// Keep one trace record every this many x-updates.
    pub record_every: usize,
    /// Measure wall time in traces; off gives byte-identical outputs across runs.
    pub wall_clock: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t_z: 50,
            t_y: 25,
            l: 1,
            k: 500,
            s1: 0.01,
            s2: 0.01,
            alpha: 0.01,
            optimizer: OuterOptimizer::Adam(AdamParams::default()),
            warm_start_y: false,
            barrier_floor: 1e-12,
            backtrack_max: 30,
            record_every: 1,
            wall_clock: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.t_z == 0 || self.t_y == 0 || self.l == 0 {
            return bad("T_z, T_y and L must be at least 1".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        for (name, v) in [("s1", self.s1), ("s2", self.s2)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be nonnegative, got {}", self.alpha));
        }
        if !(self.barrier_floor > 0.0 && self.barrier_floor <= 1e-6) {
            return bad(format!("barrier_floor must lie in (0, 1e-6], got {}", self.barrier_floor));
        }
        if let OuterOptimizer::Adam(p) = self.optimizer {
            if !(0.0..1.0).contains(&p.beta1) || !(0.0..1.0).contains(&p.beta2) || !(p.eps > 0.0) {
                return bad("Adam needs beta1, beta2 in [0, 1) and eps > 0".into());
            }
        }
        Ok(())
    }
}

//! Bilevel value-function interior-point method.
//!
//! Each outer stage fixes `(μ1, μ2, θ, τ)` from a [`Schedule`] and performs
//! `L` x-updates. An x-update solves the regularized lower level for `z`,
//! descends the log-barrier problem in `y`, and steps `x` along the barrier
//! hypergradient. Only first-order oracles are queried.

mod adam;
mod config;
mod schedule;
mod solver;

pub use adam::{adam_step, AdamMoments, AdamParams};
pub use config::{OuterOptimizer, SolverConfig};
pub use schedule::{Schedule, ScheduleMode, StageParams};
pub use solver::{
    hyper_gradient, outer_stage, run, run_seeded, solve_y, solve_z, BarrierGuard, RunFailure, RunOutput, StageState,
};

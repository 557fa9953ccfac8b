//! Gradient-based bilevel baselines that differentiate through the lower
//! level: reverse-mode unrolling (RHG, truncated TRHG) and implicit
//! differentiation with conjugate gradient or a Neumann series.
//!
//! All of them need Hessian- and Jacobian-vector products of `f`. Wrap a
//! first-order problem in [`FiniteDiffSecondOrder`](crate::problems::FiniteDiffSecondOrder)
//! to run them anyway.

mod implicit;
mod runner;
mod unroll;

pub use implicit::{implicit_hypergradient, CurvaturePolicy, ImplicitConfig, ImplicitMethod, ImplicitOutput};
pub use runner::{run_baseline, Baseline, BaselineConfig};
pub use unroll::{rhg_hypergradient, UnrollConfig, UnrollOutput};

use crate::counters::Oracle;
use crate::error::Result;
use crate::scalar::Scalar;

/// `T` lower-level gradient steps `y ← y - s ∇_y f(x, y)`, keeping every iterate when `keep` is set.
fn descend<T: Scalar>(
    o: &mut Oracle<'_, T>,
    x: &[T],
    y0: &[T],
    t: usize,
    s: T,
    keep: bool,
    ctx: &'static str,
) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let mut y = y0.to_vec();
    let mut path = Vec::with_capacity(if keep { t } else { 0 });
    for _ in 0..t {
        let g = o.lower_grad_y(x, &y, ctx)?;
        if keep {
            path.push(y.clone());
        }
        for (yi, gi) in y.iter_mut().zip(g) {
            *yi -= s * gi;
        }
    }
    Ok((y, path))
}

use super::descend;
use crate::counters::{Oracle, OracleCounters};
use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::problems::Problem;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnrollConfig {
    /// Lower-level gradient steps.
    pub t: usize,
    pub s: f64,
    /// Backpropagate through only the last this many steps.
    pub truncate_at: Option<usize>,
}

impl Default for UnrollConfig {
    fn default() -> Self {
        Self {
            t: 100,
            s: 0.1,
            truncate_at: None,
        }
    }
}

impl UnrollConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidConfig(format!("step size s must be positive, got {}", self.s)));
        }
        if let Some(tr) = self.truncate_at {
            if tr == 0 || tr > self.t {
                return Err(Error::InvalidConfig(format!(
                    "truncate_at must lie in [1, T = {}], got {tr}",
                    self.t
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnrollOutput<T> {
    pub grad: Vec<T>,
    /// Last lower-level iterate `y_T`.
    pub y: Vec<T>,
}

/// Hypergradient of `x ↦ F(x, y_T(x))` through `T` gradient steps from `y0`.
///
/// Reverse pass: `p = ∇_y F(x, y_T)`, then for `t = T-1, …` (down to
/// `T - truncate_at`) add `-s (∂²f/∂x∂y)ᵀ p` evaluated at `y_t` and set
/// `p ← (I - s ∂²f/∂y²(y_t)) p`.
pub fn rhg_hypergradient<T: Scalar>(
    problem: &dyn Problem<T>,
    x: &[T],
    y0: &[T],
    cfg: &UnrollConfig,
    counters: &mut OracleCounters,
) -> Result<UnrollOutput<T>> {
    cfg.validate()?;
    let method = if cfg.truncate_at.is_some_and(|t| t < cfg.t) { "TRHG" } else { "RHG" };
    if !problem.has_second_order() {
        return Err(Error::MissingSecondOrder { method });
    }
    let mut o = Oracle::new(problem, counters);
    let s = T::lit(cfg.s);
    let (y, path) = descend(&mut o, x, y0, cfg.t, s, true, method)?;
    let mut grad = o.upper_grad_x(x, &y, method)?;
    let mut p = o.upper_grad_y(x, &y, method)?;
    let depth = cfg.truncate_at.unwrap_or(cfg.t);
    let stop = cfg.t - depth;
    for t in (stop..cfg.t).rev() {
        let yt = &path[t];
        let j = o.jvp(x, yt, &p, method)?;
        axpy(-s, &j, &mut grad);
        if t > stop {
            let h = o.hvp(x, yt, &p, method)?;
            axpy(-s, &h, &mut p);
        }
    }
    Ok(UnrollOutput { grad, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problems::Quadratic;

    #[test]
    fn empty_trajectory_gives_direct_gradient() {
        let q = Quadratic::new(Matrix::identity(2), vec![1.0, 0.0]).unwrap();
        let mut c = OracleCounters::default();
        let cfg = UnrollConfig {
            t: 0,
            ..UnrollConfig::default()
        };
        let out = rhg_hypergradient(&q, &[0.5, 0.5], &[2.0, 3.0], &cfg, &mut c).unwrap();
        assert_eq!(out.grad, q.upper_grad_x(&[0.5, 0.5], &[2.0, 3.0]));
        assert_eq!(c.second_order_total(), 0);
    }

    #[test]
    fn truncation_bounds() {
        let bad = UnrollConfig {
            t: 5,
            s: 0.1,
            truncate_at: Some(6),
        };
        assert!(bad.validate().is_err());
    }
}

//! Bilevel problem oracles and the built-in benchmark problems.
//!
//! A [`Problem`] exposes the upper-level objective `F(x, y)` and the
//! lower-level objective `f(x, y)` through value and gradient oracles, with
//! optional second-order products for the baselines that need them.

mod detection;
mod fd;
mod fn_problem;
mod hyperclean;
mod quadratic;
pub mod registry;
pub mod rng;
mod toy;

use std::sync::Arc;

pub use detection::{detection_f1, DetectionScores};
pub use fd::FiniteDiffSecondOrder;
pub use fn_problem::{FnProblem, FnProblemBuilder};
pub use hyperclean::{Architecture, HyperClean, HyperCleanSpec, LabeledSet, Reduction};
pub use quadratic::Quadratic;
pub use toy::ToySin;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Box constraint `lower <= x <= upper` modelling a compact upper-level set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraint<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> BoxConstraint<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidConfig("box lower bound exceeds upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    /// Componentwise clamp.
    pub fn project(&self, x: &mut [T]) {
        for ((xi, &lo), &hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.max(lo).min(hi);
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((&xi, &lo), &hi)| lo <= xi && xi <= hi)
    }
}

/// Reference solution of a test problem.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub upper_value: T,
}

/// First-order oracle bundle for `min_x F(x, y) s.t. y in argmin_y f(x, y)`.
///
/// Oracles must be pure. Implementations are shared read-only between
/// concurrent runs.
pub trait Problem<T: Scalar>: Send + Sync {
    fn name(&self) -> String;
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;

    /// Upper-level objective `F(x, y)`.
    fn upper(&self, x: &[T], y: &[T]) -> T;
    /// Lower-level objective `f(x, y)`.
    fn lower(&self, x: &[T], y: &[T]) -> T;

    fn upper_grad_x(&self, x: &[T], y: &[T]) -> Vec<T>;
    fn upper_grad_y(&self, x: &[T], y: &[T]) -> Vec<T>;
    fn lower_grad_x(&self, x: &[T], y: &[T]) -> Vec<T>;
    fn lower_grad_y(&self, x: &[T], y: &[T]) -> Vec<T>;

    /// `(d²f/dy²) v`, length `dim_y`.
    fn lower_hvp_yy(&self, _x: &[T], _y: &[T], _v: &[T]) -> Option<Vec<T>> {
        None
    }

    /// `(d²f/dx dy)ᵀ v` for `v` of length `dim_y`; returns length `dim_x`.
    fn lower_jvp_xy(&self, _x: &[T], _y: &[T], _v: &[T]) -> Option<Vec<T>> {
        None
    }

    fn has_second_order(&self) -> bool {
        false
    }

    /// Second-order products come from finite differences rather than analytic formulas.
    fn second_order_is_fd(&self) -> bool {
        false
    }

    fn box_x(&self) -> Option<&BoxConstraint<T>> {
        None
    }

    fn known_optimum(&self) -> Option<KnownOptimum<T>> {
        None
    }

    /// Distance from `y` to the lower-level solution set `S(x)`, when known in closed form.
    fn ll_set_distance(&self, _x: &[T], _y: &[T]) -> Option<T> {
        None
    }

    /// Default starting point for runs that do not specify one.
    fn suggested_start(&self, _seed: u64) -> (Vec<T>, Vec<T>) {
        (vec![T::zero(); self.dim_x()], vec![T::zero(); self.dim_y()])
    }
}

macro_rules! forward_problem {
    ($ptr:ty) => {
        impl<T: Scalar, P: Problem<T> + ?Sized> Problem<T> for $ptr {
            fn name(&self) -> String {
                (**self).name()
            }
            fn dim_x(&self) -> usize {
                (**self).dim_x()
            }
            fn dim_y(&self) -> usize {
                (**self).dim_y()
            }
            fn upper(&self, x: &[T], y: &[T]) -> T {
                (**self).upper(x, y)
            }
            fn lower(&self, x: &[T], y: &[T]) -> T {
                (**self).lower(x, y)
            }
            fn upper_grad_x(&self, x: &[T], y: &[T]) -> Vec<T> {
                (**self).upper_grad_x(x, y)
            }
            fn upper_grad_y(&self, x: &[T], y: &[T]) -> Vec<T> {
                (**self).upper_grad_y(x, y)
            }
            fn lower_grad_x(&self, x: &[T], y: &[T]) -> Vec<T> {
                (**self).lower_grad_x(x, y)
            }
            fn lower_grad_y(&self, x: &[T], y: &[T]) -> Vec<T> {
                (**self).lower_grad_y(x, y)
            }
            fn lower_hvp_yy(&self, x: &[T], y: &[T], v: &[T]) -> Option<Vec<T>> {
                (**self).lower_hvp_yy(x, y, v)
            }
            fn lower_jvp_xy(&self, x: &[T], y: &[T], v: &[T]) -> Option<Vec<T>> {
                (**self).lower_jvp_xy(x, y, v)
            }
            fn has_second_order(&self) -> bool {
                (**self).has_second_order()
            }
            fn second_order_is_fd(&self) -> bool {
                (**self).second_order_is_fd()
            }
            fn box_x(&self) -> Option<&BoxConstraint<T>> {
                (**self).box_x()
            }
            fn known_optimum(&self) -> Option<KnownOptimum<T>> {
                (**self).known_optimum()
            }
            fn ll_set_distance(&self, x: &[T], y: &[T]) -> Option<T> {
                (**self).ll_set_distance(x, y)
            }
            fn suggested_start(&self, seed: u64) -> (Vec<T>, Vec<T>) {
                (**self).suggested_start(seed)
            }
        }
    };
}

forward_problem!(Box<P>);
forward_problem!(Arc<P>);
forward_problem!(&P);

pub(crate) fn check_point<T: Scalar>(p: &dyn Problem<T>, x: &[T], y: &[T]) -> Result<()> {
    if x.len() != p.dim_x() || y.len() != p.dim_y() {
        return Err(Error::Dimension(format!(
            "{} expects (x, y) of lengths ({}, {}), got ({}, {})",
            p.name(),
            p.dim_x(),
            p.dim_y(),
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_projection_clamps() {
        let b = BoxConstraint::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let mut x = vec![-0.5, 2.0];
        b.project(&mut x);
        assert_eq!(x, vec![0.0, 1.0]);
        assert!(b.contains(&x));
        assert!(BoxConstraint::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxConstraint::new(vec![1.0], vec![1.0, 2.0]).is_err());
    }
}

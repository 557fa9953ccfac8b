use std::f64::consts::PI;

use super::{KnownOptimum, Problem};
use crate::scalar::Scalar;

/// `F(x, y) = (x - a)² + (y - a)²`, `f(x, y) = sin(x + y)` with scalar `x`, `y`.
///
/// The lower level has infinitely many minimizers `x + y = -π/2 + 2πj` and is
/// non-convex, so neither a unique lower-level solution nor convexity holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySin<T> {
    pub a: T,
}

impl<T: Scalar> ToySin<T> {
    pub fn new(a: T) -> Self {
        Self { a }
    }
}

impl<T: Scalar> Problem<T> for ToySin<T> {
    fn name(&self) -> String {
        format!("toy(a={})", self.a)
    }

    fn dim_x(&self) -> usize {
        1
    }

    fn dim_y(&self) -> usize {
        1
    }

    fn upper(&self, x: &[T], y: &[T]) -> T {
        let (dx, dy) = (x[0] - self.a, y[0] - self.a);
        dx * dx + dy * dy
    }

    fn lower(&self, x: &[T], y: &[T]) -> T {
        (x[0] + y[0]).sin()
    }

    fn upper_grad_x(&self, x: &[T], _y: &[T]) -> Vec<T> {
        vec![T::lit(2.0) * (x[0] - self.a)]
    }

    fn upper_grad_y(&self, _x: &[T], y: &[T]) -> Vec<T> {
        vec![T::lit(2.0) * (y[0] - self.a)]
    }

    fn lower_grad_x(&self, x: &[T], y: &[T]) -> Vec<T> {
        vec![(x[0] + y[0]).cos()]
    }

    fn lower_grad_y(&self, x: &[T], y: &[T]) -> Vec<T> {
        vec![(x[0] + y[0]).cos()]
    }

    fn lower_hvp_yy(&self, x: &[T], y: &[T], v: &[T]) -> Option<Vec<T>> {
        Some(vec![-(x[0] + y[0]).sin() * v[0]])
    }

    fn lower_jvp_xy(&self, x: &[T], y: &[T], v: &[T]) -> Option<Vec<T>> {
        Some(vec![-(x[0] + y[0]).sin() * v[0]])
    }

    fn has_second_order(&self) -> bool {
        true
    }

    /// Along each branch `x + y = -π/2 + 2πj` the upper level is minimized at
    /// `x = y = -π/4 + πj`; the optimum is the branch point closest to `a`.
    fn known_optimum(&self) -> Option<KnownOptimum<T>> {
        let a = self.a.as_f64();
        let j = ((a + PI / 4.0) / PI).round();
        let mut best = f64::INFINITY;
        let mut best_pt = 0.0;
        for cand in [j - 1.0, j, j + 1.0] {
            let p = -PI / 4.0 + PI * cand;
            let val = 2.0 * (p - a) * (p - a);
            if val < best {
                best = val;
                best_pt = p;
            }
        }
        Some(KnownOptimum {
            x: vec![T::lit(best_pt)],
            y: vec![T::lit(best_pt)],
            upper_value: T::lit(best),
        })
    }

    fn ll_set_distance(&self, x: &[T], y: &[T]) -> Option<T> {
        let two_pi = T::lit(2.0 * PI);
        let base = -T::lit(PI / 2.0) - x[0];
        let j = ((y[0] - base) / two_pi).round();
        Some((y[0] - (base + j * two_pi)).abs())
    }
}

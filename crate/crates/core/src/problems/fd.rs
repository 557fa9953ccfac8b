use super::{BoxConstraint, KnownOptimum, Problem};
use crate::linalg::dot;
use crate::scalar::Scalar;

/// Supplies `hvp`/`jvp` by central differences of the first-order oracles.
///
/// Lets the second-order baselines run on problems that only provide
/// gradients. Calls through this wrapper are counted as `hvp_fd`/`jvp_fd`.
#[derive(Debug, Clone)]
pub struct FiniteDiffSecondOrder<P> {
    inner: P,
    rel_step: f64,
}

impl<P> FiniteDiffSecondOrder<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, rel_step: 1e-5 }
    }

    pub fn with_step(inner: P, rel_step: f64) -> Self {
        Self { inner, rel_step }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    /// Step along unit direction `v/‖v‖`, scaled by the magnitude of `y`.
    fn step<T: Scalar>(&self, y: &[T], v: &[T]) -> Option<(T, T)> {
        let vn = dot(v, v).sqrt();
        if vn == T::zero() {
            return None;
        }
        let ymax = y.iter().fold(T::one(), |m, &a| m.max(a.abs()));
        Some((T::lit(self.rel_step) * ymax / vn, vn))
    }

    fn central<T: Scalar, F>(&self, y: &[T], v: &[T], out_len: usize, grad: F) -> Vec<T>
    where
        F: Fn(&[T]) -> Vec<T>,
    {
        let Some((h, _)) = self.step(y, v) else {
            return vec![T::zero(); out_len];
        };
        let plus: Vec<T> = y.iter().zip(v).map(|(&a, &b)| a + h * b).collect();
        let minus: Vec<T> = y.iter().zip(v).map(|(&a, &b)| a - h * b).collect();
        let two_h = h + h;
        grad(&plus)
            .into_iter()
            .zip(grad(&minus))
            .map(|(p, m)| (p - m) / two_h)
            .collect()
    }
}

impl<T: Scalar, P: Problem<T>> Problem<T> for FiniteDiffSecondOrder<P> {
    fn name(&self) -> String {
        self.inner.name()
    }
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }
    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }
    fn upper(&self, x: &[T], y: &[T]) -> T {
        self.inner.upper(x, y)
    }
    fn lower(&self, x: &[T], y: &[T]) -> T {
        self.inner.lower(x, y)
    }
    fn upper_grad_x(&self, x: &[T], y: &[T]) -> Vec<T> {
        self.inner.upper_grad_x(x, y)
    }
    fn upper_grad_y(&self, x: &[T], y: &[T]) -> Vec<T> {
        self.inner.upper_grad_y(x, y)
    }
    fn lower_grad_x(&self, x: &[T], y: &[T]) -> Vec<T> {
        self.inner.lower_grad_x(x, y)
    }
    fn lower_grad_y(&self, x: &[T], y: &[T]) -> Vec<T> {
        self.inner.lower_grad_y(x, y)
    }

    fn lower_hvp_yy(&self, x: &[T], y: &[T], v: &[T]) -> Option<Vec<T>> {
        Some(self.central(y, v, self.inner.dim_y(), |yy| self.inner.lower_grad_y(x, yy)))
    }

    fn lower_jvp_xy(&self, x: &[T], y: &[T], v: &[T]) -> Option<Vec<T>> {
        Some(self.central(y, v, self.inner.dim_x(), |yy| self.inner.lower_grad_x(x, yy)))
    }

    fn has_second_order(&self) -> bool {
        true
    }
    fn second_order_is_fd(&self) -> bool {
        true
    }
    fn box_x(&self) -> Option<&BoxConstraint<T>> {
        self.inner.box_x()
    }
    fn known_optimum(&self) -> Option<KnownOptimum<T>> {
        self.inner.known_optimum()
    }
    fn ll_set_distance(&self, x: &[T], y: &[T]) -> Option<T> {
        self.inner.ll_set_distance(x, y)
    }
    fn suggested_start(&self, seed: u64) -> (Vec<T>, Vec<T>) {
        self.inner.suggested_start(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ToySin;

    #[test]
    fn matches_analytic_toy_products() {
        let toy = ToySin::new(0.0f64);
        let fd = FiniteDiffSecondOrder::new(toy.clone());
        let (x, y, v) = ([0.3], [-1.1], [0.7]);
        let exact = toy.lower_hvp_yy(&x, &y, &v).unwrap()[0];
        let approx = fd.lower_hvp_yy(&x, &y, &v).unwrap()[0];
        assert!((exact - approx).abs() < 1e-8);
        let exact = toy.lower_jvp_xy(&x, &y, &v).unwrap()[0];
        let approx = fd.lower_jvp_xy(&x, &y, &v).unwrap()[0];
        assert!((exact - approx).abs() < 1e-8);
        assert!(fd.second_order_is_fd());
    }
}

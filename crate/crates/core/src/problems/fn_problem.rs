use super::{BoxConstraint, KnownOptimum, Problem};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

type ValueFn<T> = Box<dyn Fn(&[T], &[T]) -> T + Send + Sync>;
type GradFn<T> = Box<dyn Fn(&[T], &[T]) -> Vec<T> + Send + Sync>;
type ProductFn<T> = Box<dyn Fn(&[T], &[T], &[T]) -> Vec<T> + Send + Sync>;

struct Level<T> {
    value: ValueFn<T>,
    grad_x: GradFn<T>,
    grad_y: GradFn<T>,
}

/// A problem assembled from closures.
pub struct FnProblem<T> {
    name: String,
    dim_x: usize,
    dim_y: usize,
    upper: Level<T>,
    lower: Level<T>,
    second_order: Option<(ProductFn<T>, ProductFn<T>)>,
    box_x: Option<BoxConstraint<T>>,
    known: Option<KnownOptimum<T>>,
}

impl<T: Scalar> FnProblem<T> {
    pub fn builder(name: impl Into<String>, dim_x: usize, dim_y: usize) -> FnProblemBuilder<T> {
        FnProblemBuilder {
            name: name.into(),
            dim_x,
            dim_y,
            upper: None,
            lower: None,
            second_order: None,
            box_x: None,
            known: None,
        }
    }
}

pub struct FnProblemBuilder<T> {
    name: String,
    dim_x: usize,
    dim_y: usize,
    upper: Option<Level<T>>,
    lower: Option<Level<T>>,
    second_order: Option<(ProductFn<T>, ProductFn<T>)>,
    box_x: Option<BoxConstraint<T>>,
    known: Option<KnownOptimum<T>>,
}

impl<T: Scalar> FnProblemBuilder<T> {
    /// `F` with its partial gradients.
    pub fn upper<V, GX, GY>(mut self, value: V, grad_x: GX, grad_y: GY) -> Self
    where
        V: Fn(&[T], &[T]) -> T + Send + Sync + 'static,
        GX: Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
        GY: Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
    {
        self.upper = Some(Level {
            value: Box::new(value),
            grad_x: Box::new(grad_x),
            grad_y: Box::new(grad_y),
        });
        self
    }

    /// `f` with its partial gradients.
    pub fn lower<V, GX, GY>(mut self, value: V, grad_x: GX, grad_y: GY) -> Self
    where
        V: Fn(&[T], &[T]) -> T + Send + Sync + 'static,
        GX: Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
        GY: Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
    {
        self.lower = Some(Level {
            value: Box::new(value),
            grad_x: Box::new(grad_x),
            grad_y: Box::new(grad_y),
        });
        self
    }

    /// `hvp(x, y, v) = ∇²_yy f v` and `jvp(x, y, v) = (∇²_xy f)ᵀ v`.
    pub fn second_order<H, J>(mut self, hvp: H, jvp: J) -> Self
    where
        H: Fn(&[T], &[T], &[T]) -> Vec<T> + Send + Sync + 'static,
        J: Fn(&[T], &[T], &[T]) -> Vec<T> + Send + Sync + 'static,
    {
        self.second_order = Some((Box::new(hvp), Box::new(jvp)));
        self
    }

    pub fn box_x(mut self, b: BoxConstraint<T>) -> Self {
        self.box_x = Some(b);
        self
    }

    pub fn known_optimum(mut self, k: KnownOptimum<T>) -> Self {
        self.known = Some(k);
        self
    }

    pub fn build(self) -> Result<FnProblem<T>> {
        if self.dim_x == 0 || self.dim_y == 0 {
            return Err(Error::Dimension("problem dimensions must be positive".into()));
        }
        if let Some(b) = &self.box_x {
            if b.lower().len() != self.dim_x {
                return Err(Error::Dimension(format!(
                    "box has length {} but dim_x is {}",
                    b.lower().len(),
                    self.dim_x
                )));
            }
        }
        let upper = self
            .upper
            .ok_or_else(|| Error::InvalidConfig("upper-level oracles missing".into()))?;
        let lower = self
            .lower
            .ok_or_else(|| Error::InvalidConfig("lower-level oracles missing".into()))?;
        Ok(FnProblem {
            name: self.name,
            dim_x: self.dim_x,
            dim_y: self.dim_y,
            upper,
            lower,
            second_order: self.second_order,
            box_x: self.box_x,
            known: self.known,
        })
    }
}

impl<T: Scalar> Problem<T> for FnProblem<T> {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn dim_x(&self) -> usize {
        self.dim_x
    }
    fn dim_y(&self) -> usize {
        self.dim_y
    }
    fn upper(&self, x: &[T], y: &[T]) -> T {
        (self.upper.value)(x, y)
    }
    fn lower(&self, x: &[T], y: &[T]) -> T {
        (self.lower.value)(x, y)
    }
    fn upper_grad_x(&self, x: &[T], y: &[T]) -> Vec<T> {
        (self.upper.grad_x)(x, y)
    }
    fn upper_grad_y(&self, x: &[T], y: &[T]) -> Vec<T> {
        (self.upper.grad_y)(x, y)
    }
    fn lower_grad_x(&self, x: &[T], y: &[T]) -> Vec<T> {
        (self.lower.grad_x)(x, y)
    }
    fn lower_grad_y(&self, x: &[T], y: &[T]) -> Vec<T> {
        (self.lower.grad_y)(x, y)
    }
    fn lower_hvp_yy(&self, x: &[T], y: &[T], v: &[T]) -> Option<Vec<T>> {
        self.second_order.as_ref().map(|(h, _)| h(x, y, v))
    }
    fn lower_jvp_xy(&self, x: &[T], y: &[T], v: &[T]) -> Option<Vec<T>> {
        self.second_order.as_ref().map(|(_, j)| j(x, y, v))
    }
    fn has_second_order(&self) -> bool {
        self.second_order.is_some()
    }
    fn box_x(&self) -> Option<&BoxConstraint<T>> {
        self.box_x.as_ref()
    }
    fn known_optimum(&self) -> Option<KnownOptimum<T>> {
        self.known.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closures_are_dispatched() {
        let p = FnProblem::<f64>::builder("sq", 1, 1)
            .upper(|x, y| x[0] * x[0] + y[0], |x, _| vec![2.0 * x[0]], |_, _| vec![1.0])
            .lower(|x, y| (y[0] - x[0]).powi(2), |x, y| vec![2.0 * (x[0] - y[0])], |x, y| {
                vec![2.0 * (y[0] - x[0])]
            })
            .build()
            .unwrap();
        assert_eq!(p.upper(&[2.0], &[1.0]), 5.0);
        assert_eq!(p.lower_grad_y(&[1.0], &[3.0]), vec![4.0]);
        assert!(!p.has_second_order());
        assert!(p.lower_hvp_yy(&[0.0], &[0.0], &[1.0]).is_none());
    }

    #[test]
    fn missing_level_is_an_error() {
        assert!(FnProblem::<f64>::builder("x", 1, 1).build().is_err());
    }
}

use super::rng::SeededRng;
use super::{KnownOptimum, Problem};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm_sq, sub, Matrix};
use crate::scalar::Scalar;

/// `F(x, y) = ½‖x‖² + ½‖y - b‖²`, `f(x, y) = ½‖y - Ax‖²` with `A ∈ R^{n×m}`.
///
/// The lower level has the unique solution `y*(x) = Ax`, so
/// `φ(x) = ½‖x‖² + ½‖Ax - b‖²` and `∇φ(x) = x + Aᵀ(Ax - b)`. The upper-level
/// minimizer is unique when `A` has full column rank (not enforced).
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic<T> {
    a: Matrix<T>,
    b: Vec<T>,
}

impl<T: Scalar> Quadratic<T> {
    pub fn new(a: Matrix<T>, b: Vec<T>) -> Result<Self> {
        if a.rows() != b.len() {
            return Err(Error::Dimension(format!(
                "A has {} rows but b has length {}",
                a.rows(),
                b.len()
            )));
        }
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::Dimension("A must be non-empty".into()));
        }
        Ok(Self { a, b })
    }

    /// Entries of `A` drawn `N(0, 1/n)`, `b` drawn `N(0, 1)`.
    pub fn random(n: usize, m: usize, seed: u64) -> Result<Self> {
        let mut rng = SeededRng::new(seed);
        let scale = 1.0 / (n.max(1) as f64).sqrt();
        let data = (0..n * m).map(|_| T::lit(rng.normal() * scale)).collect();
        let b = (0..n).map(|_| T::lit(rng.normal())).collect();
        let a = Matrix::from_row_major(n, m, data)
            .ok_or_else(|| Error::Dimension("bad matrix shape".into()))?;
        Self::new(a, b)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn rhs(&self) -> &[T] {
        &self.b
    }

    fn residual(&self, x: &[T]) -> Vec<T> {
        sub(&self.a.mul_vec(x), &self.b)
    }

    pub fn phi(&self, x: &[T]) -> T {
        let half = T::lit(0.5);
        half * norm_sq(x) + half * norm_sq(&self.residual(x))
    }

    pub fn phi_grad(&self, x: &[T]) -> Vec<T> {
        let mut g = self.a.tr_mul_vec(&self.residual(x));
        axpy(T::one(), x, &mut g);
        g
    }

    /// Solves `(I + AᵀA) x = Aᵀ b`.
    pub fn argmin_phi(&self) -> Vec<T> {
        let m = self.a.cols();
        let mut normal = vec![T::zero(); m * m];
        for r in 0..self.a.rows() {
            let row = self.a.row(r);
            for i in 0..m {
                for j in 0..m {
                    normal[i * m + j] += row[i] * row[j];
                }
            }
        }
        for i in 0..m {
            normal[i * m + i] += T::one();
        }
        let rhs = self.a.tr_mul_vec(&self.b);
        solve_spd(m, normal, rhs)
    }

    /// Closed-form regularized lower-level value `min_y f + μ1/2‖y‖² + μ2`.
    pub fn regularized_value(&self, x: &[T], mu1: T, mu2: T) -> T {
        let ax = self.a.mul_vec(x);
        mu1 / (T::lit(2.0) * (T::one() + mu1)) * norm_sq(&ax) + mu2
    }
}

/// Gaussian elimination with partial pivoting on a dense system.
fn solve_spd<T: Scalar>(m: usize, mut a: Vec<T>, mut b: Vec<T>) -> Vec<T> {
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i * m + col].abs().partial_cmp(&a[j * m + col].abs()).unwrap())
            .unwrap();
        if piv != col {
            for k in 0..m {
                a.swap(col * m + k, piv * m + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * m + col];
        for r in col + 1..m {
            let factor = a[r * m + col] / d;
            for k in col..m {
                let v = a[col * m + k];
                a[r * m + k] -= factor * v;
            }
            let bc = b[col];
            b[r] -= factor * bc;
        }
    }
    let mut x = vec![T::zero(); m];
    for r in (0..m).rev() {
        let s = dot(&a[r * m + r + 1..r * m + m], &x[r + 1..]);
        x[r] = (b[r] - s) / a[r * m + r];
    }
    x
}

impl<T: Scalar> Problem<T> for Quadratic<T> {
    fn name(&self) -> String {
        format!("quadratic(n={},m={})", self.a.rows(), self.a.cols())
    }

    fn dim_x(&self) -> usize {
        self.a.cols()
    }

    fn dim_y(&self) -> usize {
        self.a.rows()
    }

    fn upper(&self, x: &[T], y: &[T]) -> T {
        T::lit(0.5) * (norm_sq(x) + norm_sq(&sub(y, &self.b)))
    }

    fn lower(&self, x: &[T], y: &[T]) -> T {
        T::lit(0.5) * norm_sq(&sub(y, &self.a.mul_vec(x)))
    }

    fn upper_grad_x(&self, x: &[T], _y: &[T]) -> Vec<T> {
        x.to_vec()
    }

    fn upper_grad_y(&self, _x: &[T], y: &[T]) -> Vec<T> {
        sub(y, &self.b)
    }

    fn lower_grad_x(&self, x: &[T], y: &[T]) -> Vec<T> {
        let r = sub(y, &self.a.mul_vec(x));
        self.a.tr_mul_vec(&r).into_iter().map(|v| -v).collect()
    }

    fn lower_grad_y(&self, x: &[T], y: &[T]) -> Vec<T> {
        sub(y, &self.a.mul_vec(x))
    }

    fn lower_hvp_yy(&self, _x: &[T], _y: &[T], v: &[T]) -> Option<Vec<T>> {
        Some(v.to_vec())
    }

    fn lower_jvp_xy(&self, _x: &[T], _y: &[T], v: &[T]) -> Option<Vec<T>> {
        Some(self.a.tr_mul_vec(v).into_iter().map(|e| -e).collect())
    }

    fn has_second_order(&self) -> bool {
        true
    }

    fn known_optimum(&self) -> Option<KnownOptimum<T>> {
        let x = self.argmin_phi();
        let y = self.a.mul_vec(&x);
        let upper_value = self.upper(&x, &y);
        Some(KnownOptimum { x, y, upper_value })
    }

    fn ll_set_distance(&self, x: &[T], y: &[T]) -> Option<T> {
        Some(norm_sq(&sub(y, &self.a.mul_vec(x))).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn identity_problem(b: Vec<f64>) -> Quadratic<f64> {
        Quadratic::new(Matrix::identity(2), b).unwrap()
    }

    #[test]
    fn identity_evaluation() {
        let p = identity_problem(vec![0.0, 0.0]);
        let (x, y) = ([1.0, 1.0], [1.0, 1.0]);
        assert_eq!(p.lower(&x, &y), 0.0);
        assert_eq!(p.upper(&x, &y), 2.0);
    }

    #[test]
    fn closed_form_argmin_and_gradient() {
        let p = identity_problem(vec![1.0, 0.0]);
        let x = p.argmin_phi();
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-15);
        assert_eq!(p.phi_grad(&[0.0, 0.0]), vec![-1.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(matches!(
            Quadratic::new(Matrix::<f64>::identity(2), vec![1.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn random_argmin_zeroes_phi_gradient() {
        let p = Quadratic::<f64>::random(5, 3, 9).unwrap();
        let g = p.phi_grad(&p.argmin_phi());
        assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
    }

    #[test]
    fn exact_lower_solution_has_zero_value() {
        let p = Quadratic::<f64>::random(4, 2, 1).unwrap();
        let x = [0.3, -1.2];
        let y = p.matrix().mul_vec(&x);
        assert_eq!(p.lower(&x, &y), 0.0);
        assert!(p.lower_grad_y(&x, &y).iter().all(|&v| v == 0.0));
    }
}

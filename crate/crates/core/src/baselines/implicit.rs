use super::descend;
use crate::counters::{Oracle, OracleCounters};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::problems::Problem;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImplicitMethod {
    Cg,
    Neumann,
}

/// What CG does when it meets `pᵀHp ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvaturePolicy {
    /// Keep iterating and report the event.
    Warn,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitConfig {
    /// Lower-level gradient steps before the linear solve.
    pub t: usize,
    /// CG iterations or Neumann terms.
    pub j: usize,
    pub method: ImplicitMethod,
    /// Lower-level step size, also the Neumann damping `η`.
    pub s: f64,
    pub curvature: CurvaturePolicy,
}

impl Default for ImplicitConfig {
    fn default() -> Self {
        Self {
            t: 100,
            j: 20,
            method: ImplicitMethod::Cg,
            s: 0.1,
            curvature: CurvaturePolicy::Warn,
        }
    }
}

impl ImplicitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.j == 0 {
            return Err(Error::InvalidConfig("J must be at least 1".into()));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidConfig(format!("step size s must be positive, got {}", self.s)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitOutput<T> {
    pub grad: Vec<T>,
    /// Lower-level iterate `ŷ` the linear system was formed at.
    pub y: Vec<T>,
    /// First CG iteration with non-positive curvature, and that curvature.
    pub negative_curvature: Option<(usize, f64)>,
}

/// `∇_x F(x, ŷ) - (∂²f/∂x∂y)ᵀ q` with `q ≈ (∂²f/∂y²)⁻¹ ∇_y F(x, ŷ)` and `ŷ` from `T` steps at `y0`.
///
/// CG starts at `q = 0` and stops early once the residual vanishes.
/// Neumann uses `q = η Σ_{j=0}^{J} (I - η ∂²f/∂y²)^j ∇_y F` with `η = s`.
pub fn implicit_hypergradient<T: Scalar>(
    problem: &dyn Problem<T>,
    x: &[T],
    y0: &[T],
    cfg: &ImplicitConfig,
    counters: &mut OracleCounters,
) -> Result<ImplicitOutput<T>> {
    cfg.validate()?;
    let method = match cfg.method {
        ImplicitMethod::Cg => "CG",
        ImplicitMethod::Neumann => "Neumann",
    };
    if !problem.has_second_order() {
        return Err(Error::MissingSecondOrder { method });
    }
    let mut o = Oracle::new(problem, counters);
    let s = T::lit(cfg.s);
    let (y, _) = descend(&mut o, x, y0, cfg.t, s, false, method)?;
    let rhs = o.upper_grad_y(x, &y, method)?;
    let mut negative_curvature = None;
    let q = match cfg.method {
        ImplicitMethod::Cg => {
            let mut q = vec![T::zero(); rhs.len()];
            let mut r = rhs.clone();
            let mut p = r.clone();
            let mut rr = dot(&r, &r);
            let tiny = T::epsilon() * T::epsilon() * dot(&rhs, &rhs);
            for i in 0..cfg.j {
                if rr <= tiny {
                    break;
                }
                let hp = o.hvp(x, &y, &p, method)?;
                let curvature = dot(&p, &hp);
                if curvature <= T::zero() {
                    if cfg.curvature == CurvaturePolicy::Error || curvature == T::zero() {
                        return Err(Error::CgBreakdown {
                            iteration: i,
                            curvature: curvature.as_f64(),
                        });
                    }
                    negative_curvature.get_or_insert((i, curvature.as_f64()));
                }
                let a = rr / curvature;
                axpy(a, &p, &mut q);
                axpy(-a, &hp, &mut r);
                let rr_next = dot(&r, &r);
                let b = rr_next / rr;
                for (pi, &ri) in p.iter_mut().zip(&r) {
                    *pi = ri + b * *pi;
                }
                rr = rr_next;
            }
            q
        }
        ImplicitMethod::Neumann => {
            let mut v = rhs.clone();
            let mut acc = rhs.clone();
            for _ in 0..cfg.j {
                let hv = o.hvp(x, &y, &v, method)?;
                axpy(-s, &hv, &mut v);
                axpy(T::one(), &v, &mut acc);
            }
            acc.iter().map(|&a| s * a).collect()
        }
    };
    let mut grad = o.upper_grad_x(x, &y, method)?;
    let j = o.jvp(x, &y, &q, method)?;
    axpy(-T::one(), &j, &mut grad);
    Ok(ImplicitOutput {
        grad,
        y,
        negative_curvature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problems::{Quadratic, ToySin};

    #[test]
    fn cg_is_exact_in_one_step_on_identity_hessian() {
        let q = Quadratic::<f64>::new(Matrix::identity(2), vec![1.0, 0.0]).unwrap();
        let mut c = OracleCounters::default();
        let cfg = ImplicitConfig {
            t: 3000,
            s: 0.01,
            ..ImplicitConfig::default()
        };
        let out = implicit_hypergradient(&q, &[0.0, 0.0], &[0.0, 0.0], &cfg, &mut c).unwrap();
        assert!((out.grad[0] + 1.0).abs() < 1e-10 && out.grad[1].abs() < 1e-10);
        assert_eq!(c.hvp, 1);
        assert_eq!(c.jvp, 1);
    }

    #[test]
    fn zero_upper_gradient_leaves_direct_term() {
        let q = Quadratic::<f64>::new(Matrix::identity(2), vec![1.0, -1.0]).unwrap();
        let mut c = OracleCounters::default();
        let cfg = ImplicitConfig {
            t: 0,
            ..ImplicitConfig::default()
        };
        let out = implicit_hypergradient(&q, &[0.3, 0.4], &[1.0, -1.0], &cfg, &mut c).unwrap();
        assert_eq!(out.grad, vec![0.3, 0.4]);
    }

    #[test]
    fn negative_curvature_is_reported() {
        let toy = ToySin::new(0.0);
        // sin''(x + y) = -sin(x + y) < 0 at x + y = π/2.
        let x = [0.5];
        let y = [std::f64::consts::FRAC_PI_2 - 0.5];
        let mut cfg = ImplicitConfig {
            t: 0,
            ..ImplicitConfig::default()
        };
        let mut c = OracleCounters::default();
        let out = implicit_hypergradient(&toy, &x, &y, &cfg, &mut c).unwrap();
        let (it, curv) = out.negative_curvature.unwrap();
        assert_eq!(it, 0);
        assert!(curv < 0.0);
        cfg.curvature = CurvaturePolicy::Error;
        let e = implicit_hypergradient(&toy, &x, &y, &cfg, &mut c).unwrap_err();
        assert!(matches!(e, Error::CgBreakdown { iteration: 0, .. }));
    }
}

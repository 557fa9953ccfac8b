//! Tightly solved inner problems for small `dim_y`, used as reference values.
//!
//! One-dimensional problems are solved globally: a grid locates every basin,
//! barrier domains are split into their connected components, and each local
//! minimum is refined by bisection on the analytic derivative. Two- to
//! four-dimensional problems use damped Newton (finite-difference Hessian of
//! the analytic gradient) started from every grid local minimum.

use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::problems::Problem;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub y: Vec<f64>,
    pub value: f64,
}

/// Best local minimum found, plus the value of the best distinct competitor.
#[derive(Debug, Clone, PartialEq)]
pub struct Minima {
    pub best: Minimum,
    /// Smallest value among local minima at least `1e-6` away from `best.y`.
    pub runner_up: Option<f64>,
}

impl Minima {
    /// Difference between the two best basins; small values mean the global
    /// minimizer is ambiguous and the value function may be non-smooth here.
    pub fn margin(&self) -> f64 {
        self.runner_up.map_or(f64::INFINITY, |r| r - self.best.value)
    }

    fn from_candidates(mut cands: Vec<Minimum>) -> Option<Self> {
        cands.retain(|c| c.value.is_finite());
        cands.sort_by(|a, b| a.value.total_cmp(&b.value));
        let best = cands.first()?.clone();
        let runner_up = cands
            .iter()
            .skip(1)
            .find(|c| norm_sq(&crate::linalg::sub(&c.y, &best.y)).sqrt() > 1e-6)
            .map(|c| c.value);
        Some(Minima { best, runner_up })
    }
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Root of a sign change of `d` on `[a, b]` with `d(a) < 0 < d(b)`.
fn bisect_sign(d: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if d(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn golden(obj: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (obj(c), obj(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = obj(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

/// Refines every local minimum of `obj` on the sorted sample `pts` (1-D).
fn minima_1d(obj: &dyn Fn(f64) -> f64, deriv: &dyn Fn(f64) -> f64, pts: &[f64]) -> Vec<Minimum> {
    let vals: Vec<f64> = pts.iter().map(|&p| finite_or_inf(obj(p))).collect();
    let mut out = Vec::new();
    for i in 0..pts.len() {
        let v = vals[i];
        if !v.is_finite() {
            continue;
        }
        let left = if i > 0 { vals[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < pts.len() { vals[i + 1] } else { f64::INFINITY };
        if !(v <= left && v <= right && (v < left || v < right)) {
            continue;
        }
        let a = if i > 0 { pts[i - 1] } else { pts[i] };
        let b = if i + 1 < pts.len() { pts[i + 1] } else { pts[i] };
        let y = if a == b {
            pts[i]
        } else {
            let (da, db) = (deriv(a), deriv(b));
            if da < 0.0 && db > 0.0 && da.is_finite() && db.is_finite() {
                bisect_sign(deriv, a, b)
            } else {
                golden(obj, a, b)
            }
        };
        let value = finite_or_inf(obj(y));
        // keep the sample point if refinement did not improve on it (e.g. a box edge)
        if value <= v {
            out.push(Minimum { y: vec![y], value });
        } else {
            out.push(Minimum { y: vec![pts[i]], value: v });
        }
    }
    out
}

fn fd_hessian(grad: &dyn Fn(&[f64]) -> Vec<f64>, y: &[f64]) -> Option<Vec<Vec<f64>>> {
    let n = y.len();
    let mut h = vec![vec![0.0; n]; n];
    let mut probe = y.to_vec();
    for j in 0..n {
        let step = 1e-6 * y[j].abs().max(1.0);
        probe[j] = y[j] + step;
        let gp = grad(&probe);
        probe[j] = y[j] - step;
        let gm = grad(&probe);
        probe[j] = y[j];
        if gp.iter().chain(&gm).any(|v| !v.is_finite()) {
            return None;
        }
        for i in 0..n {
            h[i][j] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (h[i][j] + h[j][i]);
            h[i][j] = s;
            h[j][i] = s;
        }
    }
    Some(h)
}

/// Solves `h d = rhs` by Cholesky; `None` unless `h` is positive definite.
fn cholesky_solve(h: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = h[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (h[i][j] - s) / l[j][j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        z[i] = (rhs[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (z[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

/// Damped Newton from `y0`; objective values outside the domain must be `+∞` or NaN.
fn newton(obj: &dyn Fn(&[f64]) -> f64, grad: &dyn Fn(&[f64]) -> Vec<f64>, y0: &[f64]) -> Minimum {
    let mut y = y0.to_vec();
    let mut val = finite_or_inf(obj(&y));
    for _ in 0..500 {
        let g = grad(&y);
        if g.iter().any(|v| !v.is_finite()) || norm_sq(&g) == 0.0 {
            break;
        }
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut d = fd_hessian(grad, &y)
            .and_then(|h| cholesky_solve(&h, &neg))
            .unwrap_or(neg.clone());
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            d = neg;
            slope = -norm_sq(&g);
        }
        let slack = 4.0 * f64::EPSILON * val.abs().max(1.0);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..80 {
            let trial: Vec<f64> = y.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let tv = finite_or_inf(obj(&trial));
            if tv <= val + 1e-4 * t * slope + slack {
                let step_sq: f64 = d.iter().map(|v| (t * v).powi(2)).sum();
                moved = step_sq > (1e-15 * (1.0 + norm_sq(&y).sqrt())).powi(2);
                y = trial;
                val = tv;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Minimum { y, value: val }
}

fn check_dims(problem: &dyn Problem<f64>, x: &[f64], grid: &GridSpec) -> Result<()> {
    if x.len() != problem.dim_x() {
        return Err(Error::Dimension(format!("x has length {}, expected {}", x.len(), problem.dim_x())));
    }
    if grid.dim() != problem.dim_y() {
        return Err(Error::Dimension(format!(
            "y grid has dimension {}, problem has dim_y {}",
            grid.dim(),
            problem.dim_y()
        )));
    }
    if grid.dim() > 4 {
        return Err(Error::Verification("tight inner solves support dim_y ≤ 4".into()));
    }
    Ok(())
}

fn axis(grid: &GridSpec) -> Vec<f64> {
    (0..grid.points_per_dim()).map(|i| grid.lo()[0] + i as f64 * grid.spacing(0)).collect()
}

/// Local minima of a smooth objective over the whole grid box, each refined.
fn smooth_minima(
    grid: &GridSpec,
    obj: &(dyn Fn(&[f64]) -> f64 + Sync),
    grad: &dyn Fn(&[f64]) -> Vec<f64>,
    extra_seeds: &[Vec<f64>],
) -> Vec<Minimum> {
    if grid.dim() == 1 {
        let mut pts = axis(grid);
        pts.extend(extra_seeds.iter().map(|s| s[0]));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let o = |y: f64| obj(&[y]);
        let d = |y: f64| grad(&[y])[0];
        return minima_1d(&o, &d, &pts);
    }
    let vals = grid.evaluate(|y| finite_or_inf(obj(y)));
    let mut seeds: Vec<Vec<f64>> = grid.local_minima(&vals).into_iter().map(|i| grid.point(i)).collect();
    if let Some(i) = super::grid::argmin(&vals) {
        seeds.push(grid.point(i));
    }
    seeds.extend(extra_seeds.iter().cloned());
    seeds.into_iter().map(|s| newton(obj, grad, &s)).collect()
}

/// Lower-level local minima at `x`, refined. Their minimum is `f*(x)`.
pub fn lower_minima(problem: &dyn Problem<f64>, x: &[f64], grid: &GridSpec) -> Result<Vec<Minimum>> {
    check_dims(problem, x, grid)?;
    let obj = |y: &[f64]| problem.lower(x, y);
    let grad = |y: &[f64]| problem.lower_grad_y(x, y);
    let mins = smooth_minima(grid, &obj, &grad, &[]);
    if mins.is_empty() {
        return Err(Error::Verification("no lower-level minimum found on the grid".into()));
    }
    Ok(mins)
}

/// `min_y f(x, y) + (μ1/2)‖y‖²` (without `μ2`) and its minimizer.
pub fn regularized_minimum(problem: &dyn Problem<f64>, x: &[f64], mu1: f64, grid: &GridSpec) -> Result<Minima> {
    check_dims(problem, x, grid)?;
    let obj = |y: &[f64]| problem.lower(x, y) + 0.5 * mu1 * norm_sq(y);
    let grad = |y: &[f64]| {
        let mut g = problem.lower_grad_y(x, y);
        g.iter_mut().zip(y).for_each(|(gi, yi)| *gi += mu1 * yi);
        g
    };
    Minima::from_candidates(smooth_minima(grid, &obj, &grad, &[]))
        .ok_or_else(|| Error::Verification("regularized lower level has no minimum on the grid".into()))
}

/// Feasible points of `h > 0` around each sample, as closed intervals `[l, r]`.
fn components_1d(h: &dyn Fn(f64) -> f64, pts: &[f64]) -> Vec<(f64, f64, bool, bool)> {
    let vals: Vec<f64> = pts.iter().map(|&p| h(p)).collect();
    let boundary = |inside: f64, outside: f64| {
        let (mut a, mut b) = (inside, outside);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            if h(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        if !(vals[i] > 0.0) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < pts.len() && vals[i + 1] > 0.0 {
            i += 1;
        }
        let (l, open_l) = if start > 0 {
            (boundary(pts[start], pts[start - 1]), true)
        } else {
            (pts[0], false)
        };
        let (r, open_r) = if i + 1 < pts.len() {
            (boundary(pts[i], pts[i + 1]), true)
        } else {
            (pts[i], false)
        };
        out.push((l, r, open_l, open_r));
        i += 1;
    }
    out
}

/// `min_y F + (θ/2)‖y‖² - τ ln(f_reg - f)` over the barrier domain.
pub fn barrier_minimum(
    problem: &dyn Problem<f64>,
    x: &[f64],
    f_reg: f64,
    theta: f64,
    tau: f64,
    grid: &GridSpec,
    seeds: &[Vec<f64>],
) -> Result<Minima> {
    check_dims(problem, x, grid)?;
    let obj = |y: &[f64]| {
        let gap = f_reg - problem.lower(x, y);
        if !(gap > 0.0) {
            return f64::INFINITY;
        }
        problem.upper(x, y) + 0.5 * theta * norm_sq(y) - tau * gap.ln()
    };
    let grad = |y: &[f64]| {
        let gap = f_reg - problem.lower(x, y);
        let w = tau / gap;
        let gu = problem.upper_grad_y(x, y);
        let gl = problem.lower_grad_y(x, y);
        gu.iter()
            .zip(&gl)
            .zip(y)
            .map(|((a, b), yi)| if gap > 0.0 { a + theta * yi + w * b } else { f64::NAN })
            .collect::<Vec<f64>>()
    };
    let cands = if grid.dim() == 1 {
        let mut pts = axis(grid);
        pts.extend(seeds.iter().map(|s| s[0]));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let h = |y: f64| f_reg - problem.lower(x, &[y]);
        let o = |y: f64| obj(&[y]);
        let d = |y: f64| grad(&[y])[0];
        let mut cands = Vec::new();
        for (l, r, open_l, open_r) in components_1d(&h, &pts) {
            const N: usize = 256;
            let mut sub: Vec<f64> = (0..N).map(|i| l + (r - l) * (i as f64 + 0.5) / N as f64).collect();
            if !open_l {
                sub.insert(0, l);
            }
            if !open_r {
                sub.push(r);
            }
            cands.extend(minima_1d(&o, &d, &sub));
        }
        cands
    } else {
        let feasible: Vec<Vec<f64>> = seeds.iter().filter(|s| obj(s).is_finite()).cloned().collect();
        smooth_minima(grid, &obj, &grad, &feasible)
    };
    Minima::from_candidates(cands)
        .ok_or_else(|| Error::Verification("barrier domain has no point on the grid or seeds".into()))
}

/// `ψ_μ(x) = min F(x, y)` subject to `-1 ≤ f(x, y) - f_reg ≤ 0`, one-dimensional
/// `y` only. The feasible intervals are bracketed by bisection, so bands much
/// narrower than the grid spacing are still found when `seeds` lie in them.
pub fn relaxed_minimum(
    problem: &dyn Problem<f64>,
    x: &[f64],
    f_reg: f64,
    grid: &GridSpec,
    seeds: &[Vec<f64>],
) -> Result<Minimum> {
    check_dims(problem, x, grid)?;
    if grid.dim() != 1 {
        return Err(Error::Verification("the tight relaxed problem is one-dimensional only".into()));
    }
    let slack = |y: f64| {
        let d = problem.lower(x, &[y]) - f_reg;
        (-d).min(d + 1.0)
    };
    let mut pts = axis(grid);
    pts.extend(seeds.iter().map(|s| s[0]));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let o = |y: f64| problem.upper(x, &[y]);
    let d = |y: f64| problem.upper_grad_y(x, &[y])[0];
    let mut cands = Vec::new();
    for (l, r, _, _) in components_1d(&slack, &pts) {
        const N: usize = 256;
        let mut sub = vec![l];
        sub.extend((0..N).map(|i| l + (r - l) * (i as f64 + 0.5) / N as f64));
        sub.push(r);
        cands.extend(minima_1d(&o, &d, &sub));
    }
    // points where the band has zero width (slack exactly 0) are feasible too
    cands.extend(pts.iter().filter(|&&p| slack(p) == 0.0).map(|&p| Minimum { y: vec![p], value: o(p) }));
    cands
        .into_iter()
        .filter(|m| m.value.is_finite() && slack(m.y[0]) >= 0.0)
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::Verification("relaxed feasible set is empty".into()))
}

/// The barrier value function and the points it is attained at.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierValue {
    /// `φ_{μ,θ,τ}(x)`.
    pub value: f64,
    pub y: Vec<f64>,
    /// Minimizer of the regularized lower level.
    pub z: Vec<f64>,
    /// `f*_μ(x)`.
    pub f_reg: f64,
    /// Smaller of the two basin margins (regularized lower level, barrier problem).
    pub margin: f64,
}

/// `φ_{μ,θ,τ}(x)` with both inner problems solved tightly.
pub fn barrier_value(
    problem: &dyn Problem<f64>,
    x: &[f64],
    mu1: f64,
    mu2: f64,
    theta: f64,
    tau: f64,
    grid: &GridSpec,
) -> Result<BarrierValue> {
    let reg = regularized_minimum(problem, x, mu1, grid)?;
    let f_reg = reg.best.value + mu2;
    let mut seeds: Vec<Vec<f64>> = lower_minima(problem, x, grid)?.into_iter().map(|m| m.y).collect();
    seeds.push(reg.best.y.clone());
    let bar = barrier_minimum(problem, x, f_reg, theta, tau, grid, &seeds)?;
    Ok(BarrierValue {
        value: bar.best.value,
        margin: reg.margin().min(bar.margin()),
        y: bar.best.y,
        z: reg.best.y,
        f_reg,
    })
}

/// `φ(x) = min {F(x, y) : y ∈ S(x)}` from refined lower-level minima; `S(x)`
/// is taken as the minima within `1e-10 (1 + |f*|)` of the best.
pub fn phi_value(problem: &dyn Problem<f64>, x: &[f64], grid: &GridSpec) -> Result<Minimum> {
    let mins = lower_minima(problem, x, grid)?;
    let fstar = mins.iter().map(|m| m.value).fold(f64::INFINITY, f64::min);
    let tol = 1e-10 * (1.0 + fstar.abs());
    mins.into_iter()
        .filter(|m| m.value <= fstar + tol)
        .map(|m| Minimum {
            value: problem.upper(x, &m.y),
            y: m.y,
        })
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::Verification("empty lower-level solution set".into()))
}

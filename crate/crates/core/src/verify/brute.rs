//! Grid-only reference values for `dim_y ≤ 2`.

use super::grid::{argmin, GridSpec};
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::problems::Problem;

/// Largest `L̂·Δ` accepted before a grid is declared too coarse.
pub const MAX_RESOLUTION_BOUND: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct GridEstimate {
    pub value: f64,
    pub y: Vec<f64>,
    /// Membership tolerance `1e-6 + L̂·Δ` used for the solution set.
    pub tol_f: f64,
    /// Grid points counted as lower-level solutions or feasible.
    pub members: usize,
}

fn grid_for(problem: &dyn Problem<f64>, x: &[f64], grid: &GridSpec) -> Result<()> {
    if problem.dim_y() > 2 || grid.dim() != problem.dim_y() {
        return Err(Error::Dimension(format!(
            "brute-force oracles need a grid matching dim_y ≤ 2 (dim_y = {}, grid dim = {})",
            problem.dim_y(),
            grid.dim()
        )));
    }
    if x.len() != problem.dim_x() {
        return Err(Error::Dimension(format!("x has length {}, expected {}", x.len(), problem.dim_x())));
    }
    Ok(())
}

/// Tolerance `1e-6 + L̂·Δ`, `L̂` the largest slope between grid neighbours.
fn tolerance(grid: &GridSpec, values: &[f64]) -> Result<f64> {
    let bound = grid.max_slope(values) * grid.max_spacing();
    if bound > MAX_RESOLUTION_BOUND {
        return Err(Error::Verification(format!(
            "grid too coarse: slope × spacing = {bound:.3e} exceeds {MAX_RESOLUTION_BOUND:e}"
        )));
    }
    Ok(1e-6 + bound)
}

/// `min F(x, ·)` over grid points with `f(x, y) ≤ min_grid f(x, ·) + tol_f`.
pub fn brute_phi(problem: &dyn Problem<f64>, x: &[f64], grid: &GridSpec) -> Result<GridEstimate> {
    grid_for(problem, x, grid)?;
    let lower = grid.evaluate(|y| problem.lower(x, y));
    let tol_f = tolerance(grid, &lower)?;
    let fmin = lower[argmin(&lower).ok_or_else(|| Error::Verification("f not finite on grid".into()))?];
    let upper = grid.evaluate(|y| problem.upper(x, y));
    let members: Vec<usize> = (0..lower.len()).filter(|&i| lower[i] <= fmin + tol_f).collect();
    let best = members
        .iter()
        .copied()
        .min_by(|&a, &b| upper[a].total_cmp(&upper[b]).then(a.cmp(&b)))
        .expect("grid minimizer is a member");
    Ok(GridEstimate {
        value: upper[best],
        y: grid.point(best),
        tol_f,
        members: members.len(),
    })
}

/// `f*_μ(x)` as the grid minimum of `f + (μ1/2)‖y‖² + μ2`.
pub fn brute_fstar_mu(problem: &dyn Problem<f64>, x: &[f64], mu1: f64, mu2: f64, grid: &GridSpec) -> Result<GridEstimate> {
    grid_for(problem, x, grid)?;
    let reg = grid.evaluate(|y| problem.lower(x, y) + 0.5 * mu1 * norm_sq(y) + mu2);
    let tol_f = tolerance(grid, &reg)?;
    let i = argmin(&reg).ok_or_else(|| Error::Verification("regularized f not finite on grid".into()))?;
    Ok(GridEstimate {
        value: reg[i],
        y: grid.point(i),
        tol_f,
        members: 1,
    })
}

/// `ψ_μ(x) = min F(x, y)` over grid points with `-1 ≤ f(x, y) - f*_μ(x) ≤ 0`,
/// `f*_μ` from [`brute_fstar_mu`].
pub fn brute_psi(problem: &dyn Problem<f64>, x: &[f64], mu1: f64, mu2: f64, grid: &GridSpec) -> Result<GridEstimate> {
    let fstar = brute_fstar_mu(problem, x, mu1, mu2, grid)?;
    let lower = grid.evaluate(|y| problem.lower(x, y));
    let upper = grid.evaluate(|y| problem.upper(x, y));
    let members: Vec<usize> = (0..lower.len())
        .filter(|&i| {
            let d = lower[i] - fstar.value;
            (-1.0..=0.0).contains(&d)
        })
        .collect();
    let best = members
        .iter()
        .copied()
        .min_by(|&a, &b| upper[a].total_cmp(&upper[b]).then(a.cmp(&b)))
        .ok_or_else(|| Error::Verification("relaxed feasible set is empty on the grid".into()))?;
    Ok(GridEstimate {
        value: upper[best],
        y: grid.point(best),
        tol_f: fstar.tol_f,
        members: members.len(),
    })
}

//! Named checks of the value-function theory and the `quick`/`full` suites.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::brute::{brute_fstar_mu, brute_phi, brute_psi};
use super::fd::{fd_gradient, relative_error};
use super::grid::GridSpec;
use super::inner::{barrier_value, lower_minima, phi_value, relaxed_minimum};
use crate::bvfim::{hyper_gradient, Schedule};
use crate::counters::OracleCounters;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::problems::rng::SeededRng;
use crate::problems::{Architecture, HyperClean, HyperCleanSpec, Problem, Quadratic, ToySin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Quick => "quick",
            Level::Full => "full",
        })
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(Error::InvalidConfig(format!("unknown verification level `{other}` (quick | full)"))),
        }
    }
}

/// Outcome of one named check with the quantities it measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub passed: bool,
    pub measured: BTreeMap<String, Value>,
    pub detail: String,
}

impl CheckResult {
    fn new(id: &str, passed: bool, measured: Value, detail: impl Into<String>) -> Self {
        let measured = match measured {
            Value::Object(map) => map.into_iter().collect(),
            other => BTreeMap::from([("value".to_string(), other)]),
        };
        Self {
            id: id.to_string(),
            passed,
            measured,
            detail: detail.into(),
        }
    }

    fn errored(id: &str, err: &Error) -> Self {
        Self::new(id, false, json!({}), format!("check could not run: {err}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: Level,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_ids(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect()
    }
}

/// Ids run at each level, in execution order.
pub fn suite_ids(level: Level) -> Vec<&'static str> {
    let mut ids = vec![
        "hypergrad-toy",
        "hypergrad-quadratic",
        "sandwich",
        "monotonicity",
        "oracle-gradients",
        "schedule-contract",
    ];
    if level == Level::Full {
        ids.extend(["value-limsup-toy", "value-limsup-quadratic", "relaxation", "epi-convergence"]);
    }
    ids
}

pub fn run_suite(level: Level) -> VerifyReport {
    let checks = suite_ids(level).into_iter().map(run_check).collect();
    VerifyReport { level, checks }
}

/// Runs one check of the suite by id.
pub fn run_check(id: &str) -> CheckResult {
    let out = match id {
        "hypergrad-toy" => hypergrad_toy(),
        "hypergrad-quadratic" => hypergrad_quadratic(),
        "sandwich" => sandwich(),
        "monotonicity" => monotonicity(),
        "oracle-gradients" => oracle_gradients(),
        "schedule-contract" => Ok(schedule_contract(&Schedule::geometric(), 2000, 100_000, 1e-3)),
        "value-limsup-toy" => value_limsup_toy(),
        "value-limsup-quadratic" => value_limsup_quadratic(),
        "relaxation" => relaxation(),
        "epi-convergence" => epi_default(),
        other => Err(Error::InvalidConfig(format!("unknown check id `{other}`"))),
    };
    out.unwrap_or_else(|e| CheckResult::errored(id, &e))
}

// ---------------------------------------------------------------- hypergradient

/// One point of the hypergradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct HypergradSample {
    pub x: Vec<f64>,
    pub mu1: f64,
    pub mu2: f64,
    pub theta: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypergradReport {
    /// Relative error of every accepted sample, in acceptance order.
    pub errors: Vec<f64>,
    /// Samples rejected because the inner minimizers were ambiguous.
    pub skipped: usize,
}

impl HypergradReport {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Smallest basin margin accepted; below it `φ_{μ,θ,τ}` may have a kink
/// within a finite-difference step.
pub const HYPERGRAD_MIN_MARGIN: f64 = 1e-6;
const HYPERGRAD_FD_STEP: f64 = 1e-5;

/// Compares `hyper_gradient` at tightly solved `(y, z, f*_μ)` with central
/// differences of `φ_{μ,θ,τ}`. Draws from `sampler` until `count` samples with
/// unambiguous inner minimizers are accepted (at most `10 · count` draws).
pub fn check_hypergrad(
    problem: &dyn Problem<f64>,
    grid: &GridSpec,
    count: usize,
    mut sampler: impl FnMut() -> HypergradSample,
) -> Result<HypergradReport> {
    let mut errors = Vec::with_capacity(count);
    let mut skipped = 0;
    let mut draws = 0;
    while errors.len() < count {
        if draws == 10 * count {
            return Err(Error::Verification(format!(
                "only {} of {count} hypergradient samples had unambiguous minimizers",
                errors.len()
            )));
        }
        draws += 1;
        let s = sampler();
        let value = |x: &[f64]| barrier_value(problem, x, s.mu1, s.mu2, s.theta, s.tau, grid);
        let at = value(&s.x)?;
        if at.margin < HYPERGRAD_MIN_MARGIN {
            skipped += 1;
            continue;
        }
        let failed = std::cell::RefCell::new(None);
        let fd = fd_gradient(
            |x| match value(x) {
                Ok(b) => b.value,
                Err(e) => {
                    *failed.borrow_mut() = Some(e);
                    f64::NAN
                }
            },
            &s.x,
            HYPERGRAD_FD_STEP,
        );
        if let Some(e) = failed.into_inner() {
            return Err(e);
        }
        let mut counters = OracleCounters::default();
        let g = hyper_gradient(problem, &s.x, &at.y, &at.z, at.f_reg, s.tau, &mut counters)?;
        errors.push(relative_error(&g, &fd));
    }
    Ok(HypergradReport { errors, skipped })
}

fn hypergrad_result(id: &str, report: &HypergradReport, tol: f64) -> CheckResult {
    let max = report.max_error();
    CheckResult::new(
        id,
        max <= tol,
        json!({
            "samples": report.errors.len(),
            "skipped_ambiguous": report.skipped,
            "max_rel_error": max,
            "tolerance": tol,
        }),
        format!("hypergradient vs finite differences of the barrier value function, max rel. error {max:.3e}"),
    )
}

pub fn toy_hypergrad_sampler(seed: u64) -> impl FnMut() -> HypergradSample {
    let mut rng = SeededRng::new(seed);
    move || {
        let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.uniform();
        HypergradSample {
            x: vec![u(-2.0, 4.0)],
            mu1: u(1.2, 2.0),
            mu2: u(0.05, 1.0),
            theta: u(0.0, 1.0),
            tau: u(0.01, 0.5),
        }
    }
}

pub fn quadratic_hypergrad_sampler(seed: u64) -> impl FnMut() -> HypergradSample {
    let mut rng = SeededRng::new(seed);
    move || {
        let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.uniform();
        HypergradSample {
            x: vec![u(-1.5, 1.5), u(-1.5, 1.5)],
            mu1: u(0.01, 1.0),
            mu2: u(0.01, 1.0),
            theta: u(0.0, 1.0),
            tau: u(0.01, 0.5),
        }
    }
}

/// The 2×2 instance used by the quadratic checks.
pub fn check_quadratic() -> Quadratic<f64> {
    let a = Matrix::from_row_major(2, 2, vec![1.0, 0.5, -0.3, 0.8]).expect("2x2");
    Quadratic::new(a, vec![0.2, -0.4]).expect("valid quadratic")
}

fn hypergrad_toy() -> Result<CheckResult> {
    let grid = GridSpec::cube(1, -10.0, 10.0, 2001)?;
    let report = check_hypergrad(&ToySin::new(0.0), &grid, 20, toy_hypergrad_sampler(11))?;
    Ok(hypergrad_result("hypergrad-toy", &report, 1e-4))
}

fn hypergrad_quadratic() -> Result<CheckResult> {
    let grid = GridSpec::cube(2, -5.0, 5.0, 101)?;
    let report = check_hypergrad(&check_quadratic(), &grid, 20, quadratic_hypergrad_sampler(12))?;
    Ok(hypergrad_result("hypergrad-quadratic", &report, 1e-4))
}

// ---------------------------------------------------------------- f*_μ bounds

/// Grid around the regularized minimizer `Ax / (1 + μ1)` of a quadratic.
fn local_grid(q: &Quadratic<f64>, x: &[f64], mu1: f64, half_width: f64, points: usize) -> Result<GridSpec> {
    let c: Vec<f64> = q.matrix().mul_vec(x).iter().map(|v| v / (1.0 + mu1)).collect();
    GridSpec::new(
        c.iter().map(|v| v - half_width).collect(),
        c.iter().map(|v| v + half_width).collect(),
        points,
    )
}

/// Largest violation of `f* + μ2 ≤ f*_μ ≤ f* + (μ1/2)‖y*‖² + μ2` (with
/// `f* = 0`, `y* = Ax`) beyond the grid tolerance, over the given samples.
pub fn check_sandwich(q: &Quadratic<f64>, samples: &[(Vec<f64>, f64, f64)]) -> Result<(f64, usize)> {
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for (x, mu1, mu2) in samples {
        let grid = local_grid(q, x, *mu1, 0.5, 1001)?;
        let est = brute_fstar_mu(q, x, *mu1, *mu2, &grid)?;
        let ystar = q.matrix().mul_vec(x);
        let upper = 0.5 * mu1 * dot(&ystar, &ystar) + mu2;
        let v = (mu2 - est.value).max(est.value - upper - est.tol_f);
        worst = worst.max(v);
        if v > 0.0 {
            violations += 1;
        }
    }
    Ok((worst, violations))
}

fn sandwich() -> Result<CheckResult> {
    let q = check_quadratic();
    let mut rng = SeededRng::new(21);
    let samples: Vec<(Vec<f64>, f64, f64)> = (0..20)
        .map(|_| {
            let x = vec![4.0 * rng.uniform() - 2.0, 4.0 * rng.uniform() - 2.0];
            (x, 10f64.powf(-3.0 * rng.uniform()), 10f64.powf(-3.0 * rng.uniform()))
        })
        .collect();
    let (worst, violations) = check_sandwich(&q, &samples)?;
    Ok(CheckResult::new(
        "sandwich",
        violations == 0,
        json!({ "samples": samples.len(), "violations": violations, "max_excess": worst }),
        "f* + mu2 <= f*_mu <= f* + (mu1/2)|y*|^2 + mu2 on the quadratic",
    ))
}

/// Counts decreases of grid `f*_μ` along increasing `μ1` and increasing `μ2`.
pub fn check_monotonicity(
    problem: &dyn Problem<f64>,
    x: &[f64],
    grid: &GridSpec,
    mu1s: &[f64],
    mu2s: &[f64],
) -> Result<usize> {
    let mut decreases = 0;
    let mut scan = |pairs: Vec<(f64, f64)>| -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for (m1, m2) in pairs {
            let v = brute_fstar_mu(problem, x, m1, m2, grid)?.value;
            if v < prev {
                decreases += 1;
            }
            prev = v;
        }
        Ok(())
    };
    scan(mu1s.iter().map(|&m| (m, 0.1)).collect())?;
    scan(mu2s.iter().map(|&m| (0.1, m)).collect())?;
    Ok(decreases)
}

fn monotonicity() -> Result<CheckResult> {
    let mus = [0.0, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.3, 0.6, 1.0];
    let toy = ToySin::new(0.0);
    let q = check_quadratic();
    let line = GridSpec::cube(1, -8.0, 8.0, 16_001)?;
    let mut decreases = 0;
    let mut points = 0;
    for i in 0..10 {
        let x = -2.0 + 0.6 * i as f64;
        decreases += check_monotonicity(&toy, &[x], &line, &mus, &mus)?;
        let xq = [x / 2.0, 1.0 - x / 3.0];
        decreases += check_monotonicity(&q, &xq, &local_grid(&q, &xq, 0.0, 1.0, 801)?, &mus, &mus)?;
        points += 2;
    }
    Ok(CheckResult::new(
        "monotonicity",
        decreases == 0,
        json!({ "points": points, "decreases": decreases }),
        "grid f*_mu nondecreasing in mu1 and in mu2 at 10 x on the toy and the quadratic",
    ))
}

// ---------------------------------------------------------------- oracles

/// Largest relative error between each analytic oracle and central
/// differences of the corresponding value (or gradient, for second order).
pub fn check_oracle_gradients(problem: &dyn Problem<f64>, points: &[(Vec<f64>, Vec<f64>)]) -> BTreeMap<String, f64> {
    const H: f64 = 1e-6;
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    let mut note = |name: &str, e: f64| {
        let w = worst.entry(name.to_string()).or_insert(0.0);
        *w = w.max(e);
    };
    for (x, y) in points {
        note("grad_upper_x", relative_error(&problem.upper_grad_x(x, y), &fd_gradient(|x| problem.upper(x, y), x, H)));
        note("grad_upper_y", relative_error(&problem.upper_grad_y(x, y), &fd_gradient(|y| problem.upper(x, y), y, H)));
        note("grad_lower_x", relative_error(&problem.lower_grad_x(x, y), &fd_gradient(|x| problem.lower(x, y), x, H)));
        note("grad_lower_y", relative_error(&problem.lower_grad_y(x, y), &fd_gradient(|y| problem.lower(x, y), y, H)));
        if !problem.has_second_order() {
            continue;
        }
        let v: Vec<f64> = (0..y.len()).map(|i| ((i * 7 + 3) % 5) as f64 - 1.7).collect();
        if let Some(hv) = problem.lower_hvp_yy(x, y, &v) {
            let fd: Vec<f64> = (0..y.len())
                .map(|i| fd_gradient(|t| problem.lower_grad_y(x, &shift(y, &v, t[0]))[i], &[0.0], H)[0])
                .collect();
            note("hvp_yy", relative_error(&hv, &fd));
        }
        if let Some(jv) = problem.lower_jvp_xy(x, y, &v) {
            note("jvp_xy", relative_error(&jv, &fd_gradient(|x| dot(&problem.lower_grad_y(x, y), &v), x, H)));
        }
    }
    worst
}

fn shift(y: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    y.iter().zip(v).map(|(a, b)| a + t * b).collect()
}

fn random_points(rng: &mut SeededRng, count: usize, m: usize, n: usize, scale: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..count)
        .map(|_| {
            let x = (0..m).map(|_| scale * rng.normal()).collect();
            let y = (0..n).map(|_| scale * rng.normal()).collect();
            (x, y)
        })
        .collect()
}

fn oracle_gradients() -> Result<CheckResult> {
    const TOL: f64 = 1e-5;
    let mut rng = SeededRng::new(31);
    let quad: Quadratic<f64> = Quadratic::random(5, 4, 3)?;
    let clean = HyperClean::<f64>::generate(HyperCleanSpec {
        d: 4,
        classes: 3,
        n_tr: 12,
        n_val: 9,
        n_test: 6,
        arch: Architecture::TwoLayerLinear { hidden: 3 },
        seed: 5,
        ..HyperCleanSpec::default()
    })?;
    let toy_pts = random_points(&mut rng, 100, 1, 1, 2.0);
    let quad_pts = random_points(&mut rng, 100, 4, 5, 1.0);
    let clean_pts = random_points(&mut rng, 100, clean.dim_x(), clean.dim_y(), 0.5);
    let mut measured = serde_json::Map::new();
    let mut passed = true;
    for (name, worst) in [
        ("toy", check_oracle_gradients(&ToySin::new(2.0), &toy_pts)),
        ("quadratic", check_oracle_gradients(&quad, &quad_pts)),
        ("hyperclean", check_oracle_gradients(&clean, &clean_pts)),
    ] {
        passed &= worst.values().all(|&e| e <= TOL);
        measured.insert(name.to_string(), json!(worst));
    }
    measured.insert("points_per_problem".into(), json!(100));
    measured.insert("tolerance".into(), json!(TOL));
    Ok(CheckResult::new(
        "oracle-gradients",
        passed,
        Value::Object(measured),
        "analytic oracles vs central differences at 100 points per problem",
    ))
}

// ---------------------------------------------------------------- schedule

/// `|τ_k ln μ_{k,2}| ≤ bound` for every `k` in `from..=to`.
pub fn schedule_contract(schedule: &Schedule, from: usize, to: usize, bound: f64) -> CheckResult {
    let mut worst = 0.0f64;
    let mut worst_k = from;
    let mut defined = true;
    for k in from..=to {
        match schedule.contract_residual(k) {
            Some(r) if r.is_finite() => {
                if r > worst {
                    worst = r;
                    worst_k = k;
                }
            }
            _ => defined = false,
        }
    }
    CheckResult::new(
        "schedule-contract",
        defined && worst <= bound,
        json!({ "from": from, "to": to, "max_residual": worst, "at_k": worst_k, "bound": bound }),
        format!("|tau_k ln mu_k2| over k in [{from}, {to}]"),
    )
}

// ---------------------------------------------------------------- value-function limsup

#[derive(Debug, Clone, PartialEq)]
pub struct LimsupReport {
    /// Grid `f*_{μ_k}(x_k)` for every `k` of the prefix.
    pub values: Vec<f64>,
    /// Maximum over the final quarter of the prefix.
    pub tail_max: f64,
    pub bound: f64,
}

impl LimsupReport {
    pub fn passed(&self) -> bool {
        self.tail_max <= self.bound
    }
}

/// Grid values of `f*_{μ_k}(x_k)` and the tail check against `f*(x̄) + ε`.
pub fn check_fstar_limsup(
    problem: &dyn Problem<f64>,
    xs: &[Vec<f64>],
    mus: &[(f64, f64)],
    fstar_bar: f64,
    eps: f64,
    grid: &GridSpec,
) -> Result<LimsupReport> {
    if xs.len() != mus.len() || xs.len() < 50 {
        return Err(Error::InvalidConfig("the limsup prefix needs matching sequences of length >= 50".into()));
    }
    let values = xs
        .iter()
        .zip(mus)
        .map(|(x, &(m1, m2))| brute_fstar_mu(problem, x, m1, m2, grid).map(|e| e.value))
        .collect::<Result<Vec<f64>>>()?;
    let tail = &values[values.len() - values.len() / 4..];
    let tail_max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LimsupReport {
        values,
        tail_max,
        bound: fstar_bar + eps,
    })
}

fn schedule_mus(schedule: &Schedule, ks: std::ops::RangeInclusive<usize>) -> Vec<(f64, f64)> {
    ks.map(|k| {
        let p = schedule.at(k);
        (p.mu1, p.mu2.unwrap_or(0.0))
    })
    .collect()
}

fn value_limsup_toy() -> Result<CheckResult> {
    let n = 2000;
    let xs: Vec<Vec<f64>> = (1..=n).map(|k| vec![-PI / 4.0 + 1.0 / k as f64]).collect();
    let mus = schedule_mus(&Schedule::geometric(), 1..=n);
    let grid = GridSpec::cube(1, -8.0, 8.0, 32_001)?;
    let r = check_fstar_limsup(&ToySin::new(0.0), &xs, &mus, -1.0, 1e-3, &grid)?;
    Ok(CheckResult::new(
        "value-limsup-toy",
        r.passed(),
        json!({ "prefix": n, "tail_max": r.tail_max, "bound": r.bound, "first": r.values[0] }),
        "limsup f*_mu_k(x_k) <= f*(x) for x_k = -pi/4 + 1/k on the toy",
    ))
}

fn value_limsup_quadratic() -> Result<CheckResult> {
    let n = 2000;
    let a = Matrix::from_row_major(1, 1, vec![1.5]).expect("1x1");
    let q = Quadratic::new(a, vec![0.3])?;
    let xbar = 0.7;
    let xs = vec![vec![xbar]; n];
    let mus = schedule_mus(&Schedule::geometric(), 1..=n);
    let grid = GridSpec::cube(1, 1.5 * xbar - 4.0, 1.5 * xbar + 4.0, 8001)?;
    let r = check_fstar_limsup(&q, &xs, &mus, 0.0, 1e-3, &grid)?;
    let increases = r.values.windows(2).filter(|w| w[1] > w[0]).count();
    Ok(CheckResult::new(
        "value-limsup-quadratic",
        r.passed() && increases == 0,
        json!({ "prefix": n, "tail_max": r.tail_max, "bound": r.bound, "increases": increases }),
        "constant sequence on a 1-D quadratic: f*_mu_k decreases monotonically to f* = 0",
    ))
}

// ---------------------------------------------------------------- ψ ≤ φ_k

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationReport {
    /// `max (ψ_{μ_k}(x) - φ_k(x))` with both sides solved tightly.
    pub max_excess: f64,
    /// The same with `ψ` taken from the grid oracle.
    pub max_grid_excess: f64,
    pub points: usize,
    pub violations: usize,
}

/// `ψ_{μ_k}(x) ≤ φ_k(x)` at matched schedule parameters for each stage and `x`.
pub fn check_relaxation(
    problem: &dyn Problem<f64>,
    schedule: &Schedule,
    stages: &[usize],
    xs: &[Vec<f64>],
    y_grid: &GridSpec,
    psi_grid: &GridSpec,
) -> Result<RelaxationReport> {
    let mut rep = RelaxationReport {
        max_excess: f64::NEG_INFINITY,
        max_grid_excess: f64::NEG_INFINITY,
        points: 0,
        violations: 0,
    };
    for &k in stages {
        let p = schedule.at(k);
        let mu2 = p.mu2.ok_or_else(|| Error::InvalidConfig("relaxation check needs an explicit mu2".into()))?;
        for x in xs {
            let phi_k = barrier_value(problem, x, p.mu1, mu2, p.theta, p.tau, y_grid)?;
            let mut seeds: Vec<Vec<f64>> = lower_minima(problem, x, y_grid)?.into_iter().map(|m| m.y).collect();
            seeds.push(phi_k.z.clone());
            let psi = relaxed_minimum(problem, x, phi_k.f_reg, y_grid, &seeds)?;
            let grid_psi = brute_psi(problem, x, p.mu1, mu2, psi_grid)?;
            let excess = psi.value - phi_k.value;
            rep.max_excess = rep.max_excess.max(excess);
            rep.max_grid_excess = rep.max_grid_excess.max(grid_psi.value - phi_k.value);
            rep.points += 1;
            if excess > 1e-9 * (1.0 + phi_k.value.abs()) {
                rep.violations += 1;
            }
        }
    }
    Ok(rep)
}

fn relaxation() -> Result<CheckResult> {
    let stages = [200, 500, 1000, 2000];
    let xs: Vec<Vec<f64>> = (0..25).map(|i| vec![-2.0 + 0.25 * i as f64]).collect();
    let r = check_relaxation(
        &ToySin::new(0.0),
        &Schedule::geometric(),
        &stages,
        &xs,
        &GridSpec::cube(1, -10.0, 10.0, 2001)?,
        &GridSpec::cube(1, -8.0, 8.0, 160_001)?,
    )?;
    Ok(CheckResult::new(
        "relaxation",
        r.violations == 0,
        json!({
            "stages": stages,
            "points": r.points,
            "violations": r.violations,
            "max_excess": r.max_excess,
            "max_grid_excess": r.max_grid_excess,
        }),
        "psi_mu_k(x) <= phi_k(x) on the toy at stages 200, 500, 1000, 2000",
    ))
}

// ---------------------------------------------------------------- epi-convergence

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiStage {
    pub k: usize,
    /// `φ_k` per grid point; `None` where the inner solve failed.
    pub phi_k: Vec<Option<f64>>,
    /// `max_x (φ_k - φ)₊`.
    pub upper_gap: f64,
    /// `max_x (φ - φ_k)₊`.
    pub lower_gap: f64,
    /// `|τ_k ln μ_{k,2}|`.
    pub residual: Option<f64>,
    /// Grid minimizers of `φ_k`.
    pub argmin_x: Vec<f64>,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiReport {
    pub xs: Vec<Vec<f64>>,
    /// Tightly solved `φ` per grid point.
    pub phi: Vec<f64>,
    /// Grid-oracle `φ` per grid point.
    pub phi_grid: Vec<f64>,
    pub stages: Vec<EpiStage>,
}

impl EpiReport {
    /// Nonincreasing upper gap within `slack`, final gap at most `final_bound`,
    /// and at most 1% of points excluded at any stage.
    pub fn verdict(&self, slack: f64, final_bound: f64) -> (bool, String) {
        let n = self.xs.len();
        if let Some(s) = self.stages.iter().find(|s| s.excluded * 100 > n) {
            return (false, format!("stage {} excluded {} of {n} points", s.k, s.excluded));
        }
        for w in self.stages.windows(2) {
            if w[1].upper_gap > w[0].upper_gap + slack {
                return (
                    false,
                    format!(
                        "upper gap grew from {:.3e} (k={}) to {:.3e} (k={})",
                        w[0].upper_gap, w[0].k, w[1].upper_gap, w[1].k
                    ),
                );
            }
        }
        match self.stages.last() {
            Some(s) if s.upper_gap <= final_bound => (true, format!("final upper gap {:.3e}", s.upper_gap)),
            Some(s) => (false, format!("final upper gap {:.3e} exceeds {final_bound}", s.upper_gap)),
            None => (false, "no stages".into()),
        }
    }
}

/// `φ_k` (tight inner solves) against `φ` on `xs` for each stage.
pub fn check_epiconvergence(
    problem: &dyn Problem<f64>,
    schedule: &Schedule,
    xs: &[Vec<f64>],
    y_grid: &GridSpec,
    brute_grid: &GridSpec,
    stages: &[usize],
) -> Result<EpiReport> {
    use rayon::prelude::*;
    let phi = xs
        .par_iter()
        .map(|x| phi_value(problem, x, y_grid).map(|m| m.value))
        .collect::<Result<Vec<f64>>>()?;
    let phi_grid = xs
        .iter()
        .map(|x| brute_phi(problem, x, brute_grid).map(|e| e.value))
        .collect::<Result<Vec<f64>>>()?;
    let mut out = Vec::with_capacity(stages.len());
    for &k in stages {
        let p = schedule.at(k);
        let mu2 = p.mu2.ok_or_else(|| Error::InvalidConfig("epi-convergence check needs an explicit mu2".into()))?;
        let phi_k: Vec<Option<f64>> = xs
            .par_iter()
            .map(|x| {
                barrier_value(problem, x, p.mu1, mu2, p.theta, p.tau, y_grid)
                    .ok()
                    .map(|b| b.value)
                    .filter(|v| v.is_finite())
            })
            .collect();
        let (mut upper_gap, mut lower_gap) = (0.0f64, 0.0f64);
        let mut best = f64::INFINITY;
        let mut argmin_x = Vec::new();
        for (i, v) in phi_k.iter().enumerate() {
            let Some(v) = *v else { continue };
            upper_gap = upper_gap.max(v - phi[i]);
            lower_gap = lower_gap.max(phi[i] - v);
            if v < best {
                best = v;
                argmin_x = xs[i].clone();
            }
        }
        out.push(EpiStage {
            k,
            excluded: phi_k.iter().filter(|v| v.is_none()).count(),
            phi_k,
            upper_gap,
            lower_gap,
            residual: schedule.contract_residual(k),
            argmin_x,
        });
    }
    Ok(EpiReport {
        xs: xs.to_vec(),
        phi,
        phi_grid,
        stages: out,
    })
}

/// The default epi-convergence run: toy `a = 0`, `x ∈ [-2, 4]` at spacing
/// 0.01, stages {0, 500, 1000, 2000} of the geometric schedule.
pub fn default_epi_report() -> Result<EpiReport> {
    let xs: Vec<Vec<f64>> = (0..=600).map(|i| vec![-2.0 + 0.01 * i as f64]).collect();
    check_epiconvergence(
        &ToySin::new(0.0),
        &Schedule::geometric(),
        &xs,
        &GridSpec::cube(1, -10.0, 10.0, 2001)?,
        &GridSpec::cube(1, -10.0, 10.0, 200_001)?,
        &[0, 500, 1000, 2000],
    )
}

fn epi_default() -> Result<CheckResult> {
    let r = default_epi_report()?;
    let (mut passed, mut detail) = r.verdict(1e-3, 0.05);
    let last = r.stages.last().expect("four stages");
    let spacing = 0.01;
    let target = -PI / 4.0;
    let argmin_ok = last.argmin_x.first().is_some_and(|x| (x - target).abs() <= spacing);
    if !argmin_ok {
        passed = false;
        detail.push_str("; final grid argmin is not the grid point nearest -pi/4");
    }
    let brute_dev = r.phi.iter().zip(&r.phi_grid).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let stages: Vec<Value> = r
        .stages
        .iter()
        .map(|s| {
            json!({
                "k": s.k,
                "upper_gap": s.upper_gap,
                "lower_gap": s.lower_gap,
                "residual": s.residual,
                "argmin_x": s.argmin_x,
                "excluded": s.excluded,
            })
        })
        .collect();
    Ok(CheckResult::new(
        "epi-convergence",
        passed,
        json!({ "points": r.xs.len(), "stages": stages, "max_brute_phi_deviation": brute_dev }),
        detail,
    ))
}

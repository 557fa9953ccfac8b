use super::adam::{adam_step, AdamMoments};
use super::config::{OuterOptimizer, SolverConfig};
use super::schedule::Schedule;
use crate::counters::{Oracle, OracleCounters};
use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy, norm_sq};
use crate::problems::{check_point, Problem};
use crate::scalar::Scalar;
use crate::trace::{Recorder, Snapshot, Trace};

fn diverged(step: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { quantity, .. } => Error::DivergedInner { step, quantity },
        other => other,
    }
}

/// `T_z` steps of `z ← z - s1 (∇_y f(x, z) + μ1 z)` from `z0`.
///
/// Returns `z` and `f_reg = f(x, z) + (μ1/2)‖z‖² + μ2`.
#[allow(clippy::too_many_arguments)]
pub fn solve_z<T: Scalar>(
    problem: &dyn Problem<T>,
    x: &[T],
    mu1: T,
    mu2: T,
    z0: &[T],
    t_z: usize,
    s1: T,
    counters: &mut OracleCounters,
) -> Result<(Vec<T>, T)> {
    let mut o = Oracle::new(problem, counters);
    let mut z = z0.to_vec();
    for step in 0..t_z {
        let g = o.lower_grad_y(x, &z, "solve_z").map_err(diverged(step))?;
        for (zi, gi) in z.iter_mut().zip(g) {
            *zi -= s1 * (gi + mu1 * *zi);
        }
        if !all_finite(&z) {
            return Err(Error::DivergedInner { step, quantity: "z" });
        }
    }
    let f = o.lower(x, &z, "solve_z").map_err(diverged(t_z))?;
    let f_reg = f + T::lit(0.5) * mu1 * norm_sq(&z) + mu2;
    Ok((z, f_reg))
}

/// Safeguards of the barrier line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierGuard {
    pub floor: f64,
    pub backtrack_max: usize,
}

impl From<&SolverConfig> for BarrierGuard {
    fn from(c: &SolverConfig) -> Self {
        Self {
            floor: c.barrier_floor,
            backtrack_max: c.backtrack_max,
        }
    }
}

/// `T_y` accepted gradient steps on `F(x, y) + (θ/2)‖y‖² - τ ln(f_reg - f(x, y))` from `y0`.
///
/// Each step starts at `s2` and is halved until the trial point keeps
/// `f_reg - f ≥ floor` and does not increase the objective beyond its rounding
/// error. If no trial is accepted while `y` sits on the floor, the solve stops
/// early (counted in `floor_stops`). With `τ = 0` the barrier is dropped and
/// plain gradient steps are taken.
#[allow(clippy::too_many_arguments)]
pub fn solve_y<T: Scalar>(
    problem: &dyn Problem<T>,
    x: &[T],
    f_reg: T,
    theta: T,
    tau: T,
    y0: &[T],
    t_y: usize,
    s2: T,
    guard: BarrierGuard,
    counters: &mut OracleCounters,
) -> Result<Vec<T>> {
    let mut o = Oracle::new(problem, counters);
    let mut y = y0.to_vec();
    let half = T::lit(0.5);
    if tau == T::zero() {
        for step in 0..t_y {
            let g = o.upper_grad_y(x, &y, "solve_y").map_err(diverged(step))?;
            for (yi, gi) in y.iter_mut().zip(g) {
                *yi -= s2 * (gi + theta * *yi);
            }
            if !all_finite(&y) {
                return Err(Error::DivergedInner { step, quantity: "y" });
            }
        }
        return Ok(y);
    }

    let floor = T::lit(guard.floor);
    let mut lower = o.lower(x, &y, "solve_y").map_err(diverged(0))?;
    let gap = f_reg - lower;
    if !(gap >= floor) {
        return Err(Error::InfeasibleStart { gap: gap.as_f64() });
    }
    let upper = o.upper(x, &y, "solve_y").map_err(diverged(0))?;
    let penalized = |upper: T, lower: T, y: &[T]| upper + half * theta * norm_sq(y) - tau * (f_reg - lower).ln();
    let mut objective = penalized(upper, lower, &y);
    let slack_unit = T::lit(4.0) * T::epsilon();

    for step in 0..t_y {
        let gu = o.upper_grad_y(x, &y, "solve_y").map_err(diverged(step))?;
        let gl = o.lower_grad_y(x, &y, "solve_y").map_err(diverged(step))?;
        let w = tau / (f_reg - lower);
        let dir: Vec<T> = gu
            .iter()
            .zip(&gl)
            .zip(&y)
            .map(|((&a, &b), &yi)| a + theta * yi + w * b)
            .collect();
        // Rounding bound of the objective: the log term amplifies the error of
        // `f_reg - f` by `τ / gap`, which dominates once the gap is tiny.
        let slack = slack_unit * (objective.abs().max(T::one()) + w * (f_reg.abs() + lower.abs()));
        let mut s = s2;
        let mut accepted = false;
        for _ in 0..=guard.backtrack_max {
            let trial: Vec<T> = y.iter().zip(&dir).map(|(&yi, &d)| yi - s * d).collect();
            if all_finite(&trial) {
                // A non-finite trial value means the step overshot; reject it like any other.
                if let Ok(tl) = o.lower(x, &trial, "solve_y") {
                    if f_reg - tl >= floor {
                        if let Ok(tu) = o.upper(x, &trial, "solve_y") {
                            let p = penalized(tu, tl, &trial);
                            if p <= objective + slack {
                                y = trial;
                                lower = tl;
                                objective = p;
                                accepted = true;
                                break;
                            }
                        }
                    }
                }
            }
            o.counters.backtracks += 1;
            s = s * half;
        }
        if !accepted {
            // On the floor with the barrier minimizer below it: no feasible
            // point improves, so this y is as stationary as the floor allows.
            if f_reg - lower < T::lit(2.0) * floor {
                o.counters.floor_stops += 1;
                return Ok(y);
            }
            return Err(Error::BacktrackExhausted {
                step,
                halvings: guard.backtrack_max,
            });
        }
    }
    Ok(y)
}

/// `∇_x F(x, y) + τ (∇_x f(x, y) - ∇_x f(x, z)) / (f_reg - f(x, y))`.
///
/// With `τ = 0` returns `∇_x F(x, y)` without touching the lower level.
pub fn hyper_gradient<T: Scalar>(
    problem: &dyn Problem<T>,
    x: &[T],
    y: &[T],
    z: &[T],
    f_reg: T,
    tau: T,
    counters: &mut OracleCounters,
) -> Result<Vec<T>> {
    let mut o = Oracle::new(problem, counters);
    let mut g = o.upper_grad_x(x, y, "hypergradient")?;
    if tau == T::zero() {
        return Ok(g);
    }
    let lower = o.lower(x, y, "hypergradient")?;
    let gap = f_reg - lower;
    if !(gap > T::zero()) {
        return Err(Error::BarrierDomain { gap: gap.as_f64() });
    }
    let gy = o.lower_grad_x(x, y, "hypergradient")?;
    let gz = o.lower_grad_x(x, z, "hypergradient")?;
    let w = tau / gap;
    for ((gi, a), b) in g.iter_mut().zip(gy).zip(gz) {
        *gi += w * (a - b);
    }
    if !all_finite(&g) {
        return Err(Error::NonFinite {
            quantity: "hypergradient",
            context: "hypergradient",
        });
    }
    Ok(g)
}

/// Iterates carried between outer stages.
#[derive(Debug, Clone, PartialEq)]
pub struct StageState<T> {
    /// Next stage to run.
    pub k: usize,
    pub x: Vec<T>,
    pub y: Vec<T>,
    /// Warm start for the next `z` solve; zero before the first stage.
    pub z: Vec<T>,
    /// `f_reg` of the latest inner iteration.
    pub f_reg: Option<T>,
    pub adam: AdamMoments<T>,
    /// x-updates performed so far.
    pub updates: u64,
}

impl<T: Scalar> StageState<T> {
    pub fn new(x0: Vec<T>, y0: Vec<T>) -> Self {
        let (m, n) = (x0.len(), y0.len());
        Self {
            k: 0,
            x: x0,
            y: y0,
            z: vec![T::zero(); n],
            f_reg: None,
            adam: AdamMoments::zeros(m),
            updates: 0,
        }
    }
}

/// Runs the `L` x-updates of stage `state.k` and advances `state.k`.
pub fn outer_stage<T: Scalar>(
    problem: &dyn Problem<T>,
    state: &mut StageState<T>,
    schedule: &Schedule,
    config: &SolverConfig,
    counters: &mut OracleCounters,
    recorder: &mut Recorder,
) -> Result<()> {
    let k = state.k;
    for l in 0..config.l {
        inner_iteration(problem, state, schedule, config, counters, recorder, l).map_err(|e| e.at_stage(k, l))?;
    }
    state.k += 1;
    Ok(())
}

fn inner_iteration<T: Scalar>(
    problem: &dyn Problem<T>,
    state: &mut StageState<T>,
    schedule: &Schedule,
    config: &SolverConfig,
    counters: &mut OracleCounters,
    recorder: &mut Recorder,
    l: usize,
) -> Result<()> {
    let k = state.k;
    let p = schedule.at(k);
    let mu2 = match p.mu2 {
        Some(v) => T::lit(v),
        None => {
            let f = Oracle::new(problem, counters).lower(&state.x, &state.y, "adaptive mu2")?;
            T::lit(schedule.adaptive_mu2(f.as_f64()))
        }
    };
    let (z, f_reg) = solve_z(
        problem,
        &state.x,
        T::lit(p.mu1),
        mu2,
        &state.z,
        config.t_z,
        T::lit(config.s1),
        counters,
    )?;
    let (theta, tau) = (T::lit(p.theta), T::lit(p.tau));
    let guard = BarrierGuard::from(config);
    let solve = |y0: &[T], counters: &mut OracleCounters| {
        solve_y(problem, &state.x, f_reg, theta, tau, y0, config.t_y, T::lit(config.s2), guard, counters)
    };
    let y = if config.warm_start_y {
        solve(&z, counters)?
    } else {
        match solve(&state.y, counters) {
            Err(Error::InfeasibleStart { .. }) => solve(&z, counters)?,
            other => other?,
        }
    };
    let g = hyper_gradient(problem, &state.x, &y, &z, f_reg, tau, counters)?;

    let alpha = T::lit(config.alpha);
    state.updates += 1;
    match config.optimizer {
        OuterOptimizer::Gd => axpy(-alpha, &g, &mut state.x),
        OuterOptimizer::Adam(params) => {
            let delta = adam_step(&mut state.adam, &g, alpha, params, state.updates);
            axpy(T::one(), &delta, &mut state.x);
        }
    }
    if let Some(b) = problem.box_x() {
        b.project(&mut state.x);
    }
    if !all_finite(&state.x) {
        return Err(Error::NonFinite {
            quantity: "x",
            context: "outer update",
        });
    }
    state.y = y;
    state.z = z;
    state.f_reg = Some(f_reg);
    recorder.record(
        problem,
        Snapshot {
            k,
            l,
            step: k * config.l + l + 1,
            x: &state.x,
            y: &state.y,
            f_reg: Some(f_reg),
            grad: &g,
        },
        counters,
    );
    Ok(())
}

/// Final iterates of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub trace: Trace,
    pub counters: OracleCounters,
}

/// A failed run with everything recorded up to the failure.
#[derive(Debug, Clone)]
pub struct RunFailure<T> {
    pub error: Error,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub trace: Trace,
    pub counters: OracleCounters,
}

impl<T> std::fmt::Display for RunFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl<T: std::fmt::Debug> std::error::Error for RunFailure<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// `config.k` outer stages from `(x0, y0)`.
pub fn run<T: Scalar>(
    problem: &dyn Problem<T>,
    schedule: &Schedule,
    config: &SolverConfig,
    x0: Vec<T>,
    y0: Vec<T>,
) -> Result<RunOutput<T>, Box<RunFailure<T>>> {
    let fail = |error: Error, x: Vec<T>, y: Vec<T>| {
        Box::new(RunFailure {
            error,
            x,
            y,
            trace: Trace::default(),
            counters: OracleCounters::default(),
        })
    };
    if let Err(e) = config
        .validate()
        .and_then(|_| schedule.validate().map_err(Error::InvalidConfig))
        .and_then(|_| check_point(problem, &x0, &y0))
    {
        return Err(fail(e, x0, y0));
    }
    let mut state = StageState::new(x0, y0);
    if let Some(b) = problem.box_x() {
        b.project(&mut state.x);
    }
    let mut counters = OracleCounters::default();
    let mut recorder = Recorder::new(config.record_every, config.wall_clock, config.k * config.l);
    for _ in 0..config.k {
        if let Err(error) = outer_stage(problem, &mut state, schedule, config, &mut counters, &mut recorder) {
            return Err(Box::new(RunFailure {
                error,
                x: state.x,
                y: state.y,
                trace: recorder.finish(),
                counters,
            }));
        }
    }
    Ok(RunOutput {
        x: state.x,
        y: state.y,
        trace: recorder.finish(),
        counters,
    })
}

/// [`run`] from the problem's suggested start for `seed`.
pub fn run_seeded<T: Scalar>(
    problem: &dyn Problem<T>,
    schedule: &Schedule,
    config: &SolverConfig,
    seed: u64,
) -> Result<RunOutput<T>, Box<RunFailure<T>>> {
    let (x0, y0) = problem.suggested_start(seed);
    run(problem, schedule, config, x0, y0)
}

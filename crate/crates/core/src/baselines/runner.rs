use super::implicit::{implicit_hypergradient, ImplicitConfig, ImplicitMethod};
use super::unroll::{rhg_hypergradient, UnrollConfig};
use crate::bvfim::{adam_step, AdamMoments, OuterOptimizer, RunFailure, RunOutput};
use crate::counters::OracleCounters;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy};
use crate::problems::{check_point, Problem};
use crate::scalar::Scalar;
use crate::trace::{Recorder, Snapshot, Trace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    Rhg(UnrollConfig),
    /// Truncated RHG; without `truncate_at` it backpropagates through the last `T/2` steps.
    Trhg(UnrollConfig),
    Cg(ImplicitConfig),
    Neumann(ImplicitConfig),
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::Rhg(_) => "rhg",
            Baseline::Trhg(_) => "trhg",
            Baseline::Cg(_) => "cg",
            Baseline::Neumann(_) => "neumann",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Baseline::Rhg(c) => c.validate(),
            Baseline::Trhg(c) => self.unroll(c).validate(),
            Baseline::Cg(c) | Baseline::Neumann(c) => c.validate(),
        }
    }

    fn unroll(&self, c: &UnrollConfig) -> UnrollConfig {
        match self {
            Baseline::Trhg(_) => UnrollConfig {
                truncate_at: c.truncate_at.or(Some((c.t / 2).max(1))),
                ..*c
            },
            _ => *c,
        }
    }

    fn implicit(c: &ImplicitConfig, method: ImplicitMethod) -> ImplicitConfig {
        ImplicitConfig { method, ..*c }
    }
}

/// Outer-loop settings shared by all baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    /// x-updates.
    pub k: usize,
    pub alpha: f64,
    pub optimizer: OuterOptimizer,
    pub record_every: usize,
    pub wall_clock: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            k: 500,
            alpha: 0.01,
            optimizer: OuterOptimizer::Adam(Default::default()),
            record_every: 1,
            wall_clock: true,
        }
    }
}

fn step<T: Scalar>(
    problem: &dyn Problem<T>,
    method: &Baseline,
    x: &[T],
    y: &[T],
    counters: &mut OracleCounters,
    recorder: &mut Recorder,
) -> Result<(Vec<T>, Vec<T>)> {
    match method {
        Baseline::Rhg(c) | Baseline::Trhg(c) => {
            let out = rhg_hypergradient(problem, x, y, &method.unroll(c), counters)?;
            Ok((out.grad, out.y))
        }
        Baseline::Cg(c) | Baseline::Neumann(c) => {
            let which = if matches!(method, Baseline::Cg(_)) {
                ImplicitMethod::Cg
            } else {
                ImplicitMethod::Neumann
            };
            let out = implicit_hypergradient(problem, x, y, &Baseline::implicit(c, which), counters)?;
            if let Some((it, curvature)) = out.negative_curvature {
                recorder.warn(format!(
                    "CG met non-positive curvature {curvature:e} (first at iteration {it})"
                ));
            }
            Ok((out.grad, out.y))
        }
    }
}

/// `config.k` hypergradient steps on `x`, warm-starting the lower level from the previous `y`.
pub fn run_baseline<T: Scalar>(
    problem: &dyn Problem<T>,
    method: &Baseline,
    config: &BaselineConfig,
    x0: Vec<T>,
    y0: Vec<T>,
) -> Result<RunOutput<T>, Box<RunFailure<T>>> {
    let mut counters = OracleCounters::default();
    let precheck = (|| {
        method.validate()?;
        if config.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1".into()));
        }
        if !(config.alpha >= 0.0 && config.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be nonnegative, got {}", config.alpha)));
        }
        if !problem.has_second_order() {
            return Err(Error::MissingSecondOrder {
                method: method.name(),
            });
        }
        check_point(problem, &x0, &y0)
    })();
    let (mut x, mut y) = (x0, y0);
    if let Err(error) = precheck {
        return Err(Box::new(RunFailure {
            error,
            x,
            y,
            trace: Trace::default(),
            counters,
        }));
    }
    if let Some(b) = problem.box_x() {
        b.project(&mut x);
    }
    let mut adam = AdamMoments::zeros(x.len());
    let alpha = T::lit(config.alpha);
    let mut recorder = Recorder::new(config.record_every, config.wall_clock, config.k);
    for k in 0..config.k {
        let result = step(problem, method, &x, &y, &mut counters, &mut recorder).and_then(|(g, y_next)| {
            match config.optimizer {
                OuterOptimizer::Gd => axpy(-alpha, &g, &mut x),
                OuterOptimizer::Adam(p) => {
                    let d = adam_step(&mut adam, &g, alpha, p, k as u64 + 1);
                    axpy(T::one(), &d, &mut x);
                }
            }
            if let Some(b) = problem.box_x() {
                b.project(&mut x);
            }
            if !all_finite(&x) || !all_finite(&y_next) {
                return Err(Error::NonFinite {
                    quantity: "iterate",
                    context: method.name(),
                });
            }
            y = y_next;
            Ok(g)
        });
        match result {
            Ok(g) => recorder.record(
                problem,
                Snapshot {
                    k,
                    l: 0,
                    step: k + 1,
                    x: &x,
                    y: &y,
                    f_reg: None,
                    grad: &g,
                },
                &counters,
            ),
            Err(e) => {
                return Err(Box::new(RunFailure {
                    error: e.at_stage(k, 0),
                    x,
                    y,
                    trace: recorder.finish(),
                    counters,
                }))
            }
        }
    }
    Ok(RunOutput {
        x,
        y,
        trace: recorder.finish(),
        counters,
    })
}

//! Wall-clock cost of one hypergradient per method, LL dimension and inner budget.

use std::io::Write;
use std::time::Instant;

use crate::baselines::{implicit_hypergradient, ImplicitConfig, ImplicitMethod};
use crate::bvfim::{hyper_gradient, solve_y, solve_z, BarrierGuard, Schedule, SolverConfig};
use crate::counters::OracleCounters;
use crate::error::{Error, Result};
use crate::problems::rng::SeededRng;
use crate::problems::{FiniteDiffSecondOrder, Problem, Quadratic};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Lower-level dimensions `n`.
    pub dims: Vec<usize>,
    /// BVFIM inner budgets `T_z + T_y`, split 2:1 like the 50/25 default.
    pub steps: Vec<usize>,
    /// Upper-level dimension of the synthetic quadratic.
    pub m: usize,
    /// Lower-level steps and CG iterations of the CG baseline.
    pub cg_t: usize,
    pub cg_j: usize,
    pub warmup: usize,
    pub reps: usize,
    /// Cells timed concurrently. Values above 1 trade accuracy for speed.
    pub jobs: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dims: vec![100, 1000, 10_000],
            steps: vec![30, 60, 90, 120, 150, 180],
            m: 10,
            cg_t: 100,
            cg_j: 20,
            warmup: 3,
            reps: 7,
            jobs: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BenchMethod {
    Bvfim,
    /// CG with Hessian/Jacobian-vector products from finite differences.
    CgFd,
}

impl BenchMethod {
    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Bvfim => "bvfim",
            BenchMethod::CgFd => "cg-fd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCell {
    pub method: BenchMethod,
    pub n: usize,
    /// `T_z + T_y` for BVFIM, lower-level steps for CG.
    pub t: usize,
    /// CG iterations; 0 for BVFIM.
    pub j: usize,
    /// Median over the timed repetitions, microseconds.
    pub wall_us: f64,
    /// Oracle calls of one hypergradient.
    pub counters: OracleCounters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub cells: Vec<BenchCell>,
}

pub const BENCH_HEADER: &str =
    "method,n,T,J,wall_us,calls_F,calls_f,calls_gFy,calls_gfy,calls_gFx,calls_gfx,calls_hvp,calls_jvp";

/// `R²` of the least-squares line through `(x, y)`.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy * sxy / (sxx * syy)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl BenchReport {
    /// `R²` of BVFIM wall time against `T_z + T_y` at dimension `n`.
    pub fn bvfim_r_squared(&self, n: usize) -> Option<f64> {
        let (t, w): (Vec<f64>, Vec<f64>) = self
            .cells
            .iter()
            .filter(|c| c.method == BenchMethod::Bvfim && c.n == n)
            .map(|c| (c.t as f64, c.wall_us))
            .unzip();
        (t.len() >= 3).then(|| r_squared(&t, &w))
    }

    /// BVFIM-to-CG wall-time ratio per outer iteration at each dimension,
    /// BVFIM taken at the budget closest to the 50 + 25 default.
    pub fn ratios(&self) -> Vec<(usize, f64)> {
        let mut dims: Vec<usize> = self.cells.iter().map(|c| c.n).collect();
        dims.sort_unstable();
        dims.dedup();
        dims.into_iter()
            .filter_map(|n| {
                let bv = self
                    .cells
                    .iter()
                    .filter(|c| c.method == BenchMethod::Bvfim && c.n == n)
                    .min_by_key(|c| c.t.abs_diff(75))?;
                let cg = self.cells.iter().find(|c| c.method == BenchMethod::CgFd && c.n == n)?;
                Some((n, bv.wall_us / cg.wall_us))
            })
            .collect()
    }

    /// Total second-order calls over all BVFIM cells.
    pub fn bvfim_second_order_calls(&self) -> u64 {
        self.cells
            .iter()
            .filter(|c| c.method == BenchMethod::Bvfim)
            .map(|c| c.counters.second_order_total())
            .sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{BENCH_HEADER}")?;
        for c in &self.cells {
            let k = &c.counters;
            writeln!(
                out,
                "{},{},{},{},{:.3},{},{},{},{},{},{},{},{}",
                c.method.name(),
                c.n,
                c.t,
                c.j,
                c.wall_us,
                k.eval_upper,
                k.eval_lower,
                k.grad_upper_y,
                k.grad_lower_y,
                k.grad_upper_x,
                k.grad_lower_x,
                k.hvp + k.hvp_fd,
                k.jvp + k.jvp_fd
            )?;
        }
        Ok(())
    }
}

struct Fixture {
    problem: Quadratic<f64>,
    x: Vec<f64>,
}

impl Fixture {
    fn new(n: usize, m: usize, seed: u64) -> Result<Self> {
        let problem = Quadratic::random(n, m, seed)?;
        let mut rng = SeededRng::new(seed ^ 0xb5);
        let x = (0..m).map(|_| rng.normal()).collect();
        Ok(Self { problem, x })
    }
}

/// One BVFIM hypergradient at stage-0 parameters from `y = z = 0`.
fn bvfim_once(fx: &Fixture, t_z: usize, t_y: usize, counters: &mut OracleCounters) -> Result<Vec<f64>> {
    let p = Schedule::geometric().at(0);
    let cfg = SolverConfig::default();
    let zero = vec![0.0; fx.problem.dim_y()];
    let (z, f_reg) = solve_z(&fx.problem, &fx.x, p.mu1, p.mu2.unwrap_or(1.0), &zero, t_z, cfg.s1, counters)?;
    let y = solve_y(&fx.problem, &fx.x, f_reg, p.theta, p.tau, &z, t_y, cfg.s2, BarrierGuard::from(&cfg), counters)?;
    hyper_gradient(&fx.problem, &fx.x, &y, &z, f_reg, p.tau, counters)
}

fn cg_once(
    problem: &dyn Problem<f64>,
    x: &[f64],
    cfg: &ImplicitConfig,
    counters: &mut OracleCounters,
) -> Result<Vec<f64>> {
    let zero = vec![0.0; problem.dim_y()];
    implicit_hypergradient(problem, x, &zero, cfg, counters).map(|o| o.grad)
}

/// Median wall time of `f` over `reps` runs after `warmup` discarded ones,
/// plus the oracle calls of a single run.
fn time<F: FnMut(&mut OracleCounters) -> Result<Vec<f64>>>(
    warmup: usize,
    reps: usize,
    mut f: F,
) -> Result<(f64, OracleCounters)> {
    let mut counters = OracleCounters::default();
    for _ in 0..warmup {
        std::hint::black_box(f(&mut OracleCounters::default())?);
    }
    let mut walls = Vec::with_capacity(reps);
    for i in 0..reps.max(1) {
        let mut c = OracleCounters::default();
        let start = Instant::now();
        std::hint::black_box(f(&mut c)?);
        walls.push(start.elapsed().as_secs_f64() * 1e6);
        if i == 0 {
            counters = c;
        }
    }
    Ok((median(walls), counters))
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Bvfim { n: usize, t: usize },
    Cg { n: usize },
}

fn run_job(cfg: &BenchConfig, job: Job) -> Result<BenchCell> {
    match job {
        Job::Bvfim { n, t } => {
            let fx = Fixture::new(n, cfg.m, cfg.seed)?;
            let t_z = (2 * t).div_ceil(3);
            let (wall_us, counters) = time(cfg.warmup, cfg.reps, |c| bvfim_once(&fx, t_z, t - t_z, c))?;
            Ok(BenchCell {
                method: BenchMethod::Bvfim,
                n,
                t,
                j: 0,
                wall_us,
                counters,
            })
        }
        Job::Cg { n } => {
            let fx = Fixture::new(n, cfg.m, cfg.seed)?;
            let fd = FiniteDiffSecondOrder::new(fx.problem);
            let icfg = ImplicitConfig {
                t: cfg.cg_t,
                j: cfg.cg_j,
                method: ImplicitMethod::Cg,
                ..ImplicitConfig::default()
            };
            let (wall_us, counters) = time(cfg.warmup, cfg.reps, |c| cg_once(&fd, &fx.x, &icfg, c))?;
            Ok(BenchCell {
                method: BenchMethod::CgFd,
                n,
                t: cfg.cg_t,
                j: cfg.cg_j,
                wall_us,
                counters,
            })
        }
    }
}

/// Times every cell; output order is by dimension, then method, then budget,
/// whatever `jobs` is.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.dims.is_empty() || cfg.steps.is_empty() || cfg.steps.iter().any(|&t| t < 2) || cfg.reps == 0 {
        return Err(Error::InvalidConfig(
            "bench needs dimensions, budgets of at least 2 and at least one repetition".into(),
        ));
    }
    let mut jobs = Vec::new();
    for &n in &cfg.dims {
        jobs.extend(cfg.steps.iter().map(|&t| Job::Bvfim { n, t }));
        jobs.push(Job::Cg { n });
    }
    let cells: Vec<Result<BenchCell>> = if cfg.jobs <= 1 {
        jobs.iter().map(|&j| run_job(cfg, j)).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(|&j| run_job(cfg, j)).collect())
    };
    Ok(BenchReport {
        cells: cells.into_iter().collect::<Result<_>>()?,
    })
}

use bvfim::bvfim::{hyper_gradient, run, solve_y, solve_z, BarrierGuard, Schedule, SolverConfig};
use bvfim::problems::{Architecture, HyperClean, HyperCleanSpec, Quadratic, ToySin};
use bvfim::{OracleCounters, Problem};
use proptest::prelude::*;

/// Central differences with step `1e-6 · max(1, |v_i|)`.
fn central<F: Fn(&[f64]) -> f64>(f: F, v: &[f64]) -> Vec<f64> {
    let mut p = v.to_vec();
    (0..v.len())
        .map(|i| {
            let h = 1e-6 * v[i].abs().max(1.0);
            p[i] = v[i] + h;
            let up = f(&p);
            p[i] = v[i] - h;
            let down = f(&p);
            p[i] = v[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(p, q)| (p - q).abs() <= tol * p.abs().max(q.abs()).max(1.0))
}

fn assert_oracles(p: &dyn Problem<f64>, x: &[f64], y: &[f64], tol: f64) {
    let gx = central(|v| p.upper(v, y), x);
    assert!(close(&p.upper_grad_x(x, y), &gx, tol), "grad_x F");
    let gy = central(|v| p.upper(x, v), y);
    assert!(close(&p.upper_grad_y(x, y), &gy, tol), "grad_y F");
    let gx = central(|v| p.lower(v, y), x);
    assert!(close(&p.lower_grad_x(x, y), &gx, tol), "grad_x f");
    let gy = central(|v| p.lower(x, v), y);
    assert!(close(&p.lower_grad_y(x, y), &gy, tol), "grad_y f");
}

fn small_clean(seed: u64, arch: Architecture) -> HyperClean<f64> {
    HyperClean::generate(HyperCleanSpec {
        d: 3,
        classes: 3,
        n_tr: 8,
        n_val: 6,
        n_test: 6,
        arch,
        seed,
        ..HyperCleanSpec::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn toy_oracles_match_central_differences(a in -3.0f64..3.0, x in -5.0f64..5.0, y in -5.0f64..5.0) {
        assert_oracles(&ToySin::new(a), &[x], &[y], 1e-5);
    }

    #[test]
    fn quadratic_oracles_match_central_differences(
        seed in 0u64..500,
        n in 1usize..6,
        m in 1usize..5,
        raw in prop::collection::vec(-3.0f64..3.0, 10),
    ) {
        let q = Quadratic::<f64>::random(n, m, seed).unwrap();
        let (x, y) = (&raw[..m], &raw[5..5 + n]);
        assert_oracles(&q, x, y, 1e-5);
        let v: Vec<f64> = raw.iter().rev().take(n).copied().collect();
        let hv = q.lower_hvp_yy(x, y, &v).unwrap();
        let fd: Vec<f64> = (0..n)
            .map(|i| central(|w| q.lower_grad_y(x, w)[i], y).iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        prop_assert!(close(&hv, &fd, 1e-5));
    }

    #[test]
    fn hyperclean_oracles_match_central_differences(
        seed in 0u64..200,
        two_layer in any::<bool>(),
        raw in prop::collection::vec(-1.5f64..1.5, 8),
        start in 0u64..100,
    ) {
        let arch = if two_layer { Architecture::TwoLayerLinear { hidden: 2 } } else { Architecture::Linear };
        let p = small_clean(seed, arch);
        let (_, y) = p.suggested_start(start);
        let y: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + 0.3 * raw[i % 8]).collect();
        assert_oracles(&p, &raw, &y, 1e-5);
    }

    #[test]
    fn toy_lower_is_bounded_and_upper_coercive(a in -3.0f64..3.0, x in -50.0f64..50.0, y in -50.0f64..50.0) {
        let t = ToySin::new(a);
        let f = t.lower(&[x], &[y]);
        prop_assert!((-1.0..=1.0).contains(&f));
        prop_assert!(t.upper(&[x], &[y]) >= (y.abs() - a.abs()).max(0.0).powi(2));
    }

    #[test]
    fn quadratic_lower_minimizer_is_ax(seed in 0u64..500, n in 1usize..6, m in 1usize..5, x in prop::collection::vec(-3.0f64..3.0, 4)) {
        let q = Quadratic::<f64>::random(n, m, seed).unwrap();
        let x = &x[..m];
        let y = q.matrix().mul_vec(x);
        prop_assert_eq!(q.lower(x, &y), 0.0);
        prop_assert!(q.lower_grad_y(x, &y).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn quadratic_regularized_value_sandwich_and_monotone(
        seed in 0u64..500,
        x in prop::collection::vec(-3.0f64..3.0, 3),
        mu1 in 1e-4f64..2.0,
        mu2 in 1e-4f64..2.0,
        bump in 1e-3f64..1.0,
    ) {
        let q = Quadratic::<f64>::random(4, 3, seed).unwrap();
        let ax = q.matrix().mul_vec(&x);
        let ystar_sq: f64 = ax.iter().map(|v| v * v).sum();
        let v = q.regularized_value(&x, mu1, mu2);
        prop_assert!(mu2 <= v && v <= 0.5 * mu1 * ystar_sq + mu2 + 1e-12);
        prop_assert!(q.regularized_value(&x, mu1 + bump, mu2) >= v);
        prop_assert!(q.regularized_value(&x, mu1, mu2 + bump) >= v);
    }

    #[test]
    fn hyperclean_lower_is_nonnegative_and_rises_to_unweighted_loss(seed in 0u64..200, start in 0u64..100) {
        let p = small_clean(seed, Architecture::TwoLayerLinear { hidden: 2 });
        let (_, y) = p.suggested_start(start);
        let unweighted = {
            let l = p.train_losses(&y);
            l.iter().sum::<f64>() / l.len() as f64
        };
        let mut prev = f64::NEG_INFINITY;
        for t in [-20.0, -5.0, -1.0, 0.0, 1.0, 5.0, 20.0, 40.0] {
            let f = p.lower(&vec![t; p.dim_x()], &y);
            prop_assert!(f >= 0.0);
            prop_assert!(f >= prev);
            prev = f;
        }
        prop_assert!((prev - unweighted).abs() <= 1e-12 * unweighted.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn accepted_barrier_iterates_stay_above_the_floor(
        a in -2.0f64..2.0,
        x in -3.0f64..3.0,
        mu in 1e-3f64..1.0,
        tau in 1e-4f64..1.0,
        t_y in 1usize..40,
    ) {
        let p = ToySin::new(a);
        let mut c = OracleCounters::default();
        let (z, f_reg) = solve_z(&p, &[x], mu, mu, &[0.0], 100, 0.1, &mut c).unwrap();
        let guard = BarrierGuard { floor: 1e-12, backtrack_max: 30 };
        let y = solve_y(&p, &[x], f_reg, mu, tau, &z, t_y, 0.01, guard, &mut c).unwrap();
        prop_assert!(f_reg - p.lower(&[x], &y) >= guard.floor);
        prop_assert_eq!(c.second_order_total(), 0);
    }

    #[test]
    fn bvfim_ledger_is_first_order_and_exact(
        a in -2.0f64..2.0,
        start in -3.0f64..3.0,
        t_z in 1usize..12,
        t_y in 1usize..12,
        k in 1usize..6,
        l in 1usize..3,
    ) {
        let cfg = SolverConfig { t_z, t_y, k, l, wall_clock: false, ..SolverConfig::default() };
        let out = run(&ToySin::new(a), &Schedule::geometric(), &cfg, vec![start], vec![start]).unwrap();
        let c = out.counters;
        let iters = (k * l) as u64;
        prop_assert_eq!(c.second_order_total(), 0);
        prop_assert_eq!(c.grad_upper_x, iters);
        prop_assert_eq!(c.grad_lower_x, 2 * iters);
        if c.floor_stops == 0 {
            // an infeasible warm start costs one extra evaluation, not gradients
            prop_assert_eq!(c.grad_lower_y, iters * (t_z + t_y) as u64);
            prop_assert_eq!(c.grad_upper_y, iters * t_y as u64);
        }
    }

    #[test]
    fn runs_are_bit_identical(seed in 0u64..1000, n in 1usize..5, m in 1usize..4, k in 1usize..8) {
        let q = Quadratic::<f64>::random(n, m, seed).unwrap();
        let cfg = SolverConfig { k, t_z: 10, t_y: 5, wall_clock: false, ..SolverConfig::default() };
        let a = run(&q, &Schedule::geometric(), &cfg, vec![0.5; m], vec![0.0; n]).unwrap();
        let b = run(&q, &Schedule::geometric(), &cfg, vec![0.5; m], vec![0.0; n]).unwrap();
        prop_assert_eq!(a.x, b.x);
        prop_assert_eq!(a.y, b.y);
        prop_assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn degenerate_hypergradients_are_exactly_the_upper_gradient(
        a in -2.0f64..2.0,
        x in -3.0f64..3.0,
        y in -3.0f64..3.0,
        z in -3.0f64..3.0,
        tau in 1e-3f64..2.0,
    ) {
        let p = ToySin::new(a);
        let direct = p.upper_grad_x(&[x], &[y]);
        let mut c = OracleCounters::default();
        let g = hyper_gradient(&p, &[x], &[y], &[z], 2.0, 0.0, &mut c).unwrap();
        prop_assert_eq!(g, direct.clone());
        let g = hyper_gradient(&p, &[x], &[y], &[y], 2.0, tau, &mut c).unwrap();
        prop_assert_eq!(g, direct);
    }
}

use bvfim::baselines::{
    implicit_hypergradient, rhg_hypergradient, run_baseline, Baseline, BaselineConfig, ImplicitConfig, ImplicitMethod,
    UnrollConfig,
};
use bvfim::bvfim::OuterOptimizer;
use bvfim::linalg::Matrix;
use bvfim::problems::{FiniteDiffSecondOrder, HyperClean, HyperCleanSpec, Quadratic, ToySin};
use bvfim::{Error, OracleCounters, Problem};
use proptest::prelude::*;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-12)
}

#[test]
fn rhg_tends_to_analytic_gradient_on_identity_quadratic() {
    let q = Quadratic::<f64>::new(Matrix::identity(2), vec![1.0, 0.0]).unwrap();
    let cfg = UnrollConfig {
        t: 400,
        s: 0.1,
        truncate_at: None,
    };
    let mut c = OracleCounters::default();
    let out = rhg_hypergradient(&q, &[0.0, 0.0], &[3.0, -2.0], &cfg, &mut c).unwrap();
    assert!((out.grad[0] + 1.0).abs() < 1e-12 && out.grad[1].abs() < 1e-12);
    assert_eq!((c.hvp, c.jvp), (399, 400));
}

/// y_T(x) for the toy lower level, by direct recursion.
fn toy_unrolled_upper(x: f64, y0: f64, t: usize, s: f64) -> f64 {
    let mut y = y0;
    for _ in 0..t {
        y -= s * (x + y).cos();
    }
    x * x + y * y
}

#[test]
fn rhg_matches_finite_differences_of_unrolled_map() {
    let toy = ToySin::new(0.0);
    let cfg = UnrollConfig {
        t: 100,
        s: 0.1,
        truncate_at: None,
    };
    let mut c = OracleCounters::default();
    let g = rhg_hypergradient(&toy, &[3.0], &[3.0], &cfg, &mut c).unwrap().grad[0];
    let h = 1e-6;
    let fd = (toy_unrolled_upper(3.0 + h, 3.0, 100, 0.1) - toy_unrolled_upper(3.0 - h, 3.0, 100, 0.1)) / (2.0 * h);
    assert!((g - fd).abs() <= 1e-4 * fd.abs(), "{g} vs {fd}");
}

#[test]
fn truncated_unroll_matches_truncated_fd_surrogate() {
    // Truncation drops the dependence of y_{T-k} on x; compare against the recursion
    // restarted from a frozen y_{T-k}.
    let toy = ToySin::new(0.0);
    let (t, k, s) = (60, 20, 0.1);
    let mut y: f64 = 2.0;
    for _ in 0..t - k {
        y -= s * (1.0 + y).cos();
    }
    let frozen = y;
    let cfg = UnrollConfig {
        t,
        s,
        truncate_at: Some(k),
    };
    let mut c = OracleCounters::default();
    let g = rhg_hypergradient(&toy, &[1.0], &[2.0], &cfg, &mut c).unwrap().grad[0];
    let h = 1e-6;
    let fd = (toy_unrolled_upper(1.0 + h, frozen, k, s) - toy_unrolled_upper(1.0 - h, frozen, k, s)) / (2.0 * h);
    assert!((g - fd).abs() <= 1e-5 * fd.abs().max(1.0), "{g} vs {fd}");
}

#[test]
fn quadratic_hypergradients_agree_with_analytic() {
    let q = Quadratic::<f64>::random(8, 3, 5).unwrap();
    let x = [0.4, -1.2, 0.9];
    let exact = q.phi_grad(&x);
    let mut c = OracleCounters::default();
    let rhg = rhg_hypergradient(
        &q,
        &x,
        &[0.0; 8],
        &UnrollConfig {
            t: 400,
            s: 0.1,
            truncate_at: None,
        },
        &mut c,
    )
    .unwrap();
    assert!(rel_err(&rhg.grad, &exact) <= 1e-6);
    let cg = implicit_hypergradient(
        &q,
        &x,
        &[0.0; 8],
        &ImplicitConfig {
            t: 400,
            j: 8,
            ..ImplicitConfig::default()
        },
        &mut c,
    )
    .unwrap();
    assert!(rel_err(&cg.grad, &exact) <= 1e-6);
    let neumann = implicit_hypergradient(
        &q,
        &x,
        &[0.0; 8],
        &ImplicitConfig {
            t: 400,
            j: 400,
            method: ImplicitMethod::Neumann,
            ..ImplicitConfig::default()
        },
        &mut c,
    )
    .unwrap();
    assert!(rel_err(&neumann.grad, &exact) <= 1e-6);
}

#[test]
fn all_baselines_reach_quadratic_argmin() {
    let q = Quadratic::<f64>::random(6, 2, 21).unwrap();
    let target = q.argmin_phi();
    let unroll = UnrollConfig {
        t: 400,
        s: 0.1,
        truncate_at: None,
    };
    let implicit = ImplicitConfig {
        t: 400,
        j: 400,
        ..ImplicitConfig::default()
    };
    let config = BaselineConfig {
        k: 500,
        alpha: 0.1,
        optimizer: OuterOptimizer::Gd,
        wall_clock: false,
        ..BaselineConfig::default()
    };
    for method in [
        Baseline::Rhg(unroll),
        Baseline::Trhg(unroll),
        Baseline::Cg(implicit),
        Baseline::Neumann(implicit),
    ] {
        let out = run_baseline(&q, &method, &config, vec![1.0, -1.0], vec![0.0; 6]).unwrap();
        let err = bvfim::linalg::distance(&out.x, &target);
        assert!(err <= 1e-4, "{}: {err}", method.name());
        assert!(out.counters.second_order_total() > 0);
        assert_eq!(out.trace.records.len(), 500);
    }
}

#[test]
fn baselines_refuse_first_order_problems() {
    let hc = HyperClean::<f64>::generate(HyperCleanSpec {
        n_tr: 12,
        n_val: 6,
        n_test: 6,
        d: 4,
        ..HyperCleanSpec::default()
    })
    .unwrap();
    let (x0, y0) = hc.suggested_start(0);
    for method in [
        Baseline::Rhg(UnrollConfig::default()),
        Baseline::Cg(ImplicitConfig::default()),
    ] {
        let err = run_baseline(&hc, &method, &BaselineConfig::default(), x0.clone(), y0.clone()).unwrap_err();
        assert!(matches!(err.error, Error::MissingSecondOrder { .. }), "{:?}", err.error);
        assert_eq!(err.counters, OracleCounters::default());
    }
    let mut c = OracleCounters::default();
    assert!(matches!(
        rhg_hypergradient(&hc, &x0, &y0, &UnrollConfig::default(), &mut c),
        Err(Error::MissingSecondOrder { method: "RHG" })
    ));
}

#[test]
fn finite_difference_wrapper_enables_baselines() {
    let hc = HyperClean::<f64>::generate(HyperCleanSpec {
        n_tr: 12,
        n_val: 6,
        n_test: 6,
        d: 4,
        ..HyperCleanSpec::default()
    })
    .unwrap();
    let fd = FiniteDiffSecondOrder::new(hc);
    let (x0, y0) = fd.suggested_start(0);
    let config = BaselineConfig {
        k: 3,
        wall_clock: false,
        ..BaselineConfig::default()
    };
    let cfg = ImplicitConfig {
        t: 5,
        j: 3,
        ..ImplicitConfig::default()
    };
    let out = run_baseline(&fd, &Baseline::Cg(cfg), &config, x0, y0).unwrap();
    assert!(out.counters.hvp_fd > 0 && out.counters.jvp_fd > 0);
    assert_eq!(out.counters.hvp + out.counters.jvp, 0);
}

#[test]
fn cg_warning_surfaces_in_trace() {
    let toy = ToySin::new(0.0);
    let cfg = ImplicitConfig {
        t: 0,
        j: 3,
        ..ImplicitConfig::default()
    };
    let config = BaselineConfig {
        k: 1,
        wall_clock: false,
        ..BaselineConfig::default()
    };
    // x + y = π/2 sits at a maximum of sin, where the Hessian is -1.
    let out = run_baseline(&toy, &Baseline::Cg(cfg), &config, vec![0.5], vec![std::f64::consts::FRAC_PI_2 - 0.5]).unwrap();
    assert_eq!(out.trace.warnings.len(), 1);
    assert!(out.trace.warnings[0].contains("curvature"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trhg_at_full_depth_is_rhg(seed in 0u64..1000, t in 1usize..40, x in prop::collection::vec(-2.0f64..2.0, 3)) {
        let q = Quadratic::<f64>::random(4, 3, seed).unwrap();
        let y0 = vec![0.5; 4];
        let full = UnrollConfig { t, s: 0.1, truncate_at: None };
        let trunc = UnrollConfig { truncate_at: Some(t), ..full };
        let mut c = OracleCounters::default();
        let a = rhg_hypergradient(&q, &x, &y0, &full, &mut c).unwrap();
        let b = rhg_hypergradient(&q, &x, &y0, &trunc, &mut c).unwrap();
        prop_assert_eq!(a.grad.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.grad.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn toy_rhg_and_trhg_bitwise(x in -3.0f64..3.0, y0 in -3.0f64..3.0, t in 1usize..60) {
        let toy = ToySin::new(2.0);
        let full = UnrollConfig { t, s: 0.1, truncate_at: None };
        let mut c = OracleCounters::default();
        let a = rhg_hypergradient(&toy, &[x], &[y0], &full, &mut c).unwrap();
        let b = rhg_hypergradient(&toy, &[x], &[y0], &UnrollConfig { truncate_at: Some(t), ..full }, &mut c).unwrap();
        prop_assert_eq!(a.grad[0].to_bits(), b.grad[0].to_bits());
    }
}

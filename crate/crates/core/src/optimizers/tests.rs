use super::*;
use crate::problems::{make_benchmark, make_synthetic, ProblemDescriptor};

fn constant(d: usize) -> Objective {
    Objective::new(d, ProblemDescriptor::benchmark("const", d), |_, _| 1.25)
}

fn row(f: f64, g: f64) -> TraceRow {
    TraceRow {
        iter: 0,
        evals: 0,
        f,
        grad_norm: Some(g),
        learner_loss: None,
        proj_residual: None,
        wall_ms: None,
    }
}

#[test]
fn constant_objective_never_moves() {
    let f = constant(5);
    let x0 = DenseVector::filled(5, 0.7);
    let cfg = OptimizerConfig {
        k_e: 3,
        max_evals: 60,
        ..Default::default()
    };
    let (x, trace) = random_search(&f, &x0, &cfg, &RngStream::new(1)).unwrap();
    assert_eq!(x, x0);
    assert_eq!(trace.iterations(), 10);
    assert!(trace.rows[1..].iter().all(|r| r.grad_norm == Some(0.0)));
}

#[test]
fn budget_of_one_iteration() {
    let f = make_benchmark("sphere", 4).unwrap();
    let cfg = OptimizerConfig {
        k_e: 3,
        max_evals: 6,
        ..Default::default()
    };
    let (_, trace) = random_search(&f, &DenseVector::filled(4, 1.0), &cfg, &RngStream::new(0)).unwrap();
    assert_eq!(trace.rows.len(), 2);
    assert_eq!(trace.evals(), 6);
    assert_eq!(f.evaluations(), trace.evals() + trace.probe_evals);
}

#[test]
fn sphere_sanity() {
    let cfg = OptimizerConfig {
        alpha: 0.05,
        delta: 0.05,
        k_e: 10,
        max_evals: 20_000,
        ..Default::default()
    };
    let mut finals: Vec<f64> = (0..10)
        .map(|seed| {
            let f = make_benchmark("sphere", 10).unwrap();
            let (_, trace) = random_search(&f, &DenseVector::filled(10, 1.0), &cfg, &RngStream::new(seed)).unwrap();
            trace.last().unwrap().f
        })
        .collect();
    finals.sort_by(f64::total_cmp);
    assert!(0.5 * (finals[4] + finals[5]) < 1e-3, "{finals:?}");
}

#[test]
fn zero_jacobian_falls_back() {
    let f = make_benchmark("sphere", 6).unwrap();
    let oracle = |_: &[f64]| Ok(DenseMatrix::zeros(2, 6));
    let cfg = OptimizerConfig {
        k_m: 2,
        max_evals: 40,
        ..Default::default()
    };
    let (_, trace) = manifold_random_search(&f, &DenseVector::filled(6, 1.0), &oracle, &cfg, &RngStream::new(2)).unwrap();
    assert_eq!(trace.fallback_iterations, 10);
}

#[test]
fn axis_aligned_manifold_moves_only_in_span() {
    let f = make_benchmark("sphere", 6).unwrap();
    let jac = DenseMatrix::from_rows(&[
        vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    ])
    .unwrap();
    let oracle = move |_: &[f64]| Ok(jac.clone());
    let cfg = OptimizerConfig {
        alpha: 0.1,
        delta: 0.01,
        k_m: 2,
        max_evals: 400,
        ..Default::default()
    };
    let x0 = DenseVector::filled(6, 1.0);
    let (x, _) = manifold_random_search(&f, &x0, &oracle, &cfg, &RngStream::new(3)).unwrap();
    assert_eq!(&x.as_slice()[2..], &x0.as_slice()[2..]);
    assert!(x[0].abs() < 0.05 && x[1].abs() < 0.05, "{x:?}");
}

#[test]
fn preconditions_rejected() {
    let f = make_benchmark("sphere", 4).unwrap();
    let x0 = DenseVector::zeros(4);
    let rng = RngStream::new(0);
    let lcfg = LearnerConfig::default();
    for (ke, km) in [(0, 2), (2, 0)] {
        let cfg = OptimizerConfig { k_e: ke, k_m: km, ..Default::default() };
        assert!(lmrs(&f, &x0, &cfg, &lcfg, 2, &rng).is_err());
    }
    let cfg = OptimizerConfig { k_e: 0, k_m: 1, ..Default::default() };
    assert!(random_search(&f, &x0, &cfg, &rng).is_err());
    let oracle = |_: &[f64]| Ok(DenseMatrix::zeros(1, 4));
    let cfg = OptimizerConfig { k_e: 1, k_m: 0, ..Default::default() };
    assert!(manifold_random_search(&f, &x0, &oracle, &cfg, &rng).is_err());
    assert!(random_search(&f, &DenseVector::zeros(3), &OptimizerConfig::default(), &rng).is_err());
}

#[test]
fn lmrs_budget_and_trace() {
    let (f, _) = make_synthetic(20, 2, &RngStream::new(4)).unwrap();
    let cfg = OptimizerConfig {
        k_e: 2,
        k_m: 2,
        max_evals: 8 * 30 + 5,
        metrics_every: Some(10),
        probe_k: 50,
        ..Default::default()
    };
    let lcfg = LearnerConfig {
        full_resolve_period: 10,
        full_resolve_epochs: 3,
        ..Default::default()
    };
    let out = lmrs(&f, &DenseVector::filled(20, 0.5), &cfg, &lcfg, 2, &RngStream::new(9)).unwrap();
    let trace = &out.trace;
    assert_eq!(trace.iterations(), 30);
    for (i, r) in trace.rows.iter().enumerate() {
        assert_eq!(r.evals, 8 * i as u64);
        assert!(r.f.is_finite());
        assert_eq!(r.proj_residual.is_some(), i > 0 && i % 10 == 0);
    }
    assert_eq!(f.evaluations(), trace.evals() + trace.probe_evals);
    assert_eq!(trace.learner_rows.len(), 30);
    assert_eq!(trace.learner_rows.iter().filter(|r| r.resolve_flag).count(), 3);
    assert!(trace.learner_rows.iter().all(|r| r.buffer_size > 0));
    assert_eq!(trace.learner_rows[0].buffer_size, 4);
}

#[test]
fn lmrs_with_unit_beta_ignores_manifold_estimate() {
    let f = make_benchmark("sphere", 8).unwrap();
    let x0 = DenseVector::filled(8, 0.3);
    let cfg = OptimizerConfig {
        alpha: 0.01,
        delta: 0.05,
        k_e: 3,
        k_m: 2,
        beta: Beta::Value(1.0),
        max_evals: 10 * 20,
        ..Default::default()
    };
    let lcfg = LearnerConfig {
        full_resolve_epochs: 2,
        ..Default::default()
    };
    let rng = RngStream::new(21);
    let out = lmrs(&f, &x0, &cfg, &lcfg, 2, &rng).unwrap();
    // Same exploration draws, step scaled by k_e/(k_e+k_m).
    let rs_cfg = OptimizerConfig {
        alpha: 0.01 * 3.0 / 5.0,
        k_m: 0,
        max_evals: 6 * 20,
        ..cfg.clone()
    };
    let (x_rs, _) = random_search(&make_benchmark("sphere", 8).unwrap(), &x0, &rs_cfg, &rng).unwrap();
    for (a, b) in out.x_final.iter().zip(x_rs.iter()) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn identical_seeds_identical_traces() {
    let make = || make_synthetic(15, 2, &RngStream::new(1)).unwrap().0;
    let cfg = OptimizerConfig {
        max_evals: 200,
        ..Default::default()
    };
    let lcfg = LearnerConfig {
        full_resolve_period: 5,
        full_resolve_epochs: 2,
        ..Default::default()
    };
    let x0 = DenseVector::filled(15, 0.1);
    let a = lmrs(&make(), &x0, &cfg, &lcfg, 2, &RngStream::new(5)).unwrap();
    let b = lmrs(&make(), &x0, &cfg, &lcfg, 2, &RngStream::new(5)).unwrap();
    assert_eq!(a.trace.to_csv(), b.trace.to_csv());
    assert_eq!(a.trace.learner_csv(), b.trace.learner_csv());
    let c = lmrs(&make(), &x0, &cfg, &lcfg, 2, &RngStream::new(6)).unwrap();
    assert_ne!(a.trace.to_csv(), c.trace.to_csv());
}

#[test]
fn non_finite_objective_aborts_with_partial_trace() {
    let f = Objective::new(2, ProblemDescriptor::benchmark("cliff", 2), |x, _| {
        if x[0] < 0.5 { f64::INFINITY } else { x[0] }
    });
    let cfg = OptimizerConfig {
        alpha: 0.2,
        delta: 0.01,
        k_e: 1,
        max_evals: 1000,
        ..Default::default()
    };
    let err = random_search(&f, &DenseVector::new(vec![1.0, 0.0]).unwrap(), &cfg, &RngStream::new(0)).unwrap_err();
    assert!(matches!(err.error, Error::NonFiniteObjective { .. }));
    assert!(!err.trace.rows.is_empty());
    assert_eq!(err.trace.stop_reason, StopReason::Error);
}

#[test]
fn stationarity_rule() {
    let zeros: Vec<TraceRow> = (0..10).map(|i| row(10.0 - i as f64, 0.0)).collect();
    assert!(stationarity_check(&zeros, 10, 1e-6));
    let falling: Vec<TraceRow> = (0..10).map(|i| row(100.0 - 5.0 * i as f64, 3.0)).collect();
    assert!(!stationarity_check(&falling, 10, 1e-6));
    let flat: Vec<TraceRow> = (0..50).map(|_| row(2.0, 1.0)).collect();
    assert!(stationarity_check(&flat, 50, 1e-8));
    assert!(!stationarity_check(&flat[..10], 50, 1e-8));
}

#[test]
fn stationarity_stops_run() {
    let f = constant(3);
    let cfg = OptimizerConfig {
        k_e: 1,
        max_evals: 10_000,
        stop_window: Some(5),
        ..Default::default()
    };
    let (_, trace) = random_search(&f, &DenseVector::zeros(3), &cfg, &RngStream::new(0)).unwrap();
    assert_eq!(trace.stop_reason, StopReason::Stationary);
    assert_eq!(trace.iterations(), 5);
}

#[test]
fn csv_round_trip() {
    let (f, _) = make_synthetic(10, 2, &RngStream::new(1)).unwrap();
    let cfg = OptimizerConfig {
        max_evals: 80,
        ..Default::default()
    };
    let out = lmrs(&f, &DenseVector::filled(10, 0.2), &cfg, &LearnerConfig::default(), 2, &RngStream::new(2)).unwrap();
    let csv = out.trace.to_csv();
    assert!(csv.starts_with("iter,evals,f,grad_norm,learner_loss,proj_residual,wall_ms\n"));
    let back = RunTrace::from_csv(&csv).unwrap();
    assert_eq!(back.rows, out.trace.rows);
}

#[test]
fn top_b_keeps_largest_pairs() {
    let f = make_benchmark("sphere", 5).unwrap();
    let est = grad_est_with(&f, &DenseVector::filled(5, 1.0), 0.1, 6, &RngStream::new(3), Default::default()).unwrap();
    let (g, ys) = filtered(&est, Some(2));
    assert_eq!(ys.len(), 2);
    let mut all: Vec<f64> = est.y_values.iter().map(|y| y.abs()).collect();
    all.sort_by(|a, b| b.total_cmp(a));
    let mut kept: Vec<f64> = ys.iter().map(|y| y.abs()).collect();
    kept.sort_by(|a, b| b.total_cmp(a));
    assert_eq!(kept, all[..2].to_vec());
    assert_eq!(g.dim(), 5);
    let (g_all, _) = filtered(&est, Some(10));
    assert_eq!(g_all, est.g);
}

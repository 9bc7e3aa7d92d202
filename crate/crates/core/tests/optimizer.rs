//! End-to-end optimizer runs on small instances against dense references.

use pullback_ngd::linalg::{cosine, norm};
use pullback_ngd::optim::{
    optimize, LineSearchConfig, Method, MetricId, OptimizeError, OptimizerConfig, ParameterVector, Problem,
    TerminalReason,
};
use pullback_ngd::oracles::{dense_symmetric_eigensolve, DenseMatrix};
use pullback_ngd::problems::rayleigh::{RayleighInstance, RayleighProblem};
use pullback_ngd::problems::spin::{LatticeGeometry, SpinProblem};
use pullback_ngd::Error;

fn all_configs(problem: &dyn Problem, iters: usize) -> Vec<OptimizerConfig> {
    let mut out = vec![
        OptimizerConfig::new(Method::Gd, iters),
        OptimizerConfig::new(Method::NonlinearCg, iters),
    ];
    out.extend(problem.supported_metrics().into_iter().map(|m| OptimizerConfig::ngd(m, iters)));
    out
}

#[test]
fn repeated_runs_are_identical() {
    let p = RayleighProblem::new(RayleighInstance::random(20, 1).unwrap());
    let x0 = ParameterVector::new(p.initial_point(2)).unwrap();
    for cfg in all_configs(&p, 40) {
        let a = optimize(&p, &x0, &cfg, &LineSearchConfig::default()).unwrap();
        let b = optimize(&p, &x0, &cfg, &LineSearchConfig::default()).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!((ra.cost, ra.grad_norm, ra.step_size), (rb.cost, rb.grad_norm, rb.step_size));
        }
        assert_eq!(a.final_x, b.final_x);
        assert_eq!(a.evaluations, b.evaluations);
    }
}

#[test]
fn rayleigh_ngd_finds_the_lowest_eigenpair() {
    let inst = RayleighInstance::random(30, 3).unwrap();
    let eig = dense_symmetric_eigensolve(&DenseMatrix::from_row_major(30, 30, inst.matrix().to_vec()).unwrap()).unwrap();
    let p = RayleighProblem::new(inst);
    let x0 = ParameterVector::new(p.initial_point(4)).unwrap();
    let trace = optimize(&p, &x0, &OptimizerConfig::ngd(MetricId::RayleighPullback, 200), &LineSearchConfig::default())
        .unwrap();
    let lmin = eig.values[0];
    assert!(((trace.final_cost() - lmin) / lmin).abs() <= 1e-10);
    assert!(cosine(&trace.final_x, &eig.vector(0)).abs() >= 1.0 - 1e-8);
    assert!(trace.evaluations.metric_builds >= trace.records.len());
    assert!(trace.metric_settings.iter().any(|(k, _)| k == "epsilon"));
}

#[test]
fn spin_methods_stay_above_the_neel_bound() {
    let p = SpinProblem::new(LatticeGeometry::new(6, 6, true).unwrap());
    let x0 = ParameterVector::new(p.initial_point(5)).unwrap();
    for cfg in all_configs(&p, 2000) {
        let t = optimize(&p, &x0, &cfg, &LineSearchConfig::default()).unwrap();
        assert!(t.records.iter().all(|r| r.cost >= -2.0 - 1e-12));
        if cfg.metric_id == Some(MetricId::SpinPullback) {
            assert!(((t.final_cost() + 2.0) / 2.0).abs() <= 1e-6, "final {}", t.final_cost());
        }
    }
}

#[test]
fn gradient_tolerance_stops_the_run() {
    let p = RayleighProblem::new(RayleighInstance::random(10, 6).unwrap());
    let x0 = ParameterVector::new(p.initial_point(7)).unwrap();
    let mut cfg = OptimizerConfig::ngd(MetricId::RayleighPullback, 500);
    cfg.grad_tol = 1e-6;
    let t = optimize(&p, &x0, &cfg, &LineSearchConfig::default()).unwrap();
    assert_eq!(t.terminal_reason, TerminalReason::Converged);
    assert!(t.records.len() < 500);
    assert!(t.records.last().unwrap().grad_norm <= 1e-6);
}

#[test]
fn zero_iteration_budget_returns_the_start() {
    let p = RayleighProblem::new(RayleighInstance::random(5, 1).unwrap());
    let x0 = ParameterVector::new(p.initial_point(2)).unwrap();
    let t = optimize(&p, &x0, &OptimizerConfig::new(Method::Gd, 0), &LineSearchConfig::default()).unwrap();
    assert!(t.records.is_empty());
    assert_eq!(t.final_x, x0.as_slice());
    assert_eq!(t.final_cost(), t.initial_cost);
    assert!((t.initial_grad_norm - norm(&p.gradient(x0.as_slice()).unwrap())).abs() == 0.0);
}

#[test]
fn invalid_setups_are_rejected() {
    let p = RayleighProblem::new(RayleighInstance::random(5, 1).unwrap());
    let x0 = ParameterVector::new(p.initial_point(2)).unwrap();
    let ls = LineSearchConfig::default();

    let err = optimize(&p, &x0, &OptimizerConfig::ngd(MetricId::Density, 5), &ls).unwrap_err();
    assert!(matches!(err, OptimizeError::Setup(Error::UnknownMetric(_))));

    let mut gd_with_metric = OptimizerConfig::new(Method::Gd, 5);
    gd_with_metric.metric_id = Some(MetricId::Fisher);
    assert!(optimize(&p, &x0, &gd_with_metric, &ls).is_err());

    let short = ParameterVector::new(vec![1.0; 4]).unwrap();
    assert!(optimize(&p, &short, &OptimizerConfig::new(Method::Gd, 5), &ls).is_err());

    let bad_ls = LineSearchConfig {
        shrink_factor: 1.5,
        ..ls
    };
    assert!(optimize(&p, &x0, &OptimizerConfig::new(Method::Gd, 5), &bad_ls).is_err());
    assert!(ParameterVector::new(vec![f64::NAN]).is_err());
}

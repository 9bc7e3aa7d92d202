//! Randomized invariants across maps, metrics and the optimizer.

mod common;

use common::random_vec;
use proptest::prelude::*;
use pullback_ngd::linalg::{cosine, dot, norm, scaled};
use pullback_ngd::metric::{CgSolverConfig, LinearOperator, ReferenceMap};
use pullback_ngd::optim::{
    gradient_descent_direction, line_search, natural_direction, optimize, LineSearchConfig, Method, MetricId,
    OptimizerConfig, ParameterVector, Problem,
};
use pullback_ngd::problems::mps::{
    lsm_cost, metric_density_reference, metric_mps_amplitude, reduced_density_matrices, AmplitudeMap, DensityMap,
    MPSState,
};
use pullback_ngd::problems::rayleigh::{
    estimate_regularization, rayleigh_cost, rayleigh_fisher_metric, rayleigh_gradient, rayleigh_pullback_metric,
    NormalizedVectorMap, RayleighInstance, RayleighProblem,
};
use pullback_ngd::problems::spin::{
    spin_cost, spin_pullback_metric, spin_regularization, LatticeGeometry, SpinLattice, SpinNormalizationMap,
    SpinProblem,
};

fn adjoint_gap(map: &dyn ReferenceMap, x: &[f64], seed: u64) -> f64 {
    let v = random_vec(map.dim_x(), seed);
    let w = random_vec(map.dim_y(), seed + 1);
    let lhs = dot(&map.jvp(x, &v), &w);
    let rhs = dot(&v, &map.vjp(x, &w));
    (lhs - rhs).abs() / (norm(&v) * norm(&w))
}

/// Symmetry gap and the smallest normalized quadratic form over a few probes.
fn symmetry_and_psd(op: &dyn LinearOperator, seed: u64) -> (f64, f64) {
    let n = op.dim();
    let mut sym: f64 = 0.0;
    let mut min_q = f64::INFINITY;
    let scale = {
        let e = random_vec(n, seed + 99);
        norm(&op.apply(&e)) / norm(&e)
    };
    for k in 0..4 {
        let u = random_vec(n, seed + 2 * k);
        let v = random_vec(n, seed + 2 * k + 1);
        let a = dot(&u, &op.apply(&v));
        let b = dot(&v, &op.apply(&u));
        sym = sym.max((a - b).abs() / (scale * norm(&u) * norm(&v)));
        min_q = min_q.min(dot(&u, &op.apply(&u)) / (scale * dot(&u, &u)));
    }
    (sym, min_q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn maps_are_adjoint_consistent(seed in 0u64..1_000_000) {
        let x = random_vec(7, seed);
        let gap = adjoint_gap(&NormalizedVectorMap { n: 7 }, &x, seed);
        prop_assert!(gap <= 1e-12);
        let s = random_vec(12, seed);
        let gap = adjoint_gap(&SpinNormalizationMap { sites: 4 }, &s, seed);
        prop_assert!(gap <= 1e-12);
        let m = MPSState::random(5, 2, seed).unwrap().params();
        let gap = adjoint_gap(&DensityMap { length: 5, bond_dim: 2 }, &m, seed);
        prop_assert!(gap <= 1e-10);
        let raw = AmplitudeMap { length: 5, bond_dim: 2, normalized: false };
        prop_assert!(adjoint_gap(&raw, &m, seed) <= 1e-10);
        let normalized = AmplitudeMap { normalized: true, ..raw };
        prop_assert!(adjoint_gap(&normalized, &m, seed) <= 1e-10);
    }

    #[test]
    fn pullback_metrics_are_symmetric_psd(seed in 0u64..1_000_000) {
        let inst = RayleighInstance::random(8, seed).unwrap();
        let reg = estimate_regularization(&inst, 100, seed).unwrap();
        let x = random_vec(8, seed + 1);
        let (sym, q) = symmetry_and_psd(&rayleigh_pullback_metric(&x, &inst, reg).unwrap(), seed);
        prop_assert!(sym <= 1e-12);
        // The power-iteration shift can undershoot slightly, so allow a small negative part.
        prop_assert!(q >= -0.05);

        let g = LatticeGeometry::new(4, 4, true).unwrap();
        let lattice = SpinLattice::random(g.clone(), seed);
        let (reg, _) = spin_regularization(&g, 100, seed).unwrap();
        let (sym, q) = symmetry_and_psd(&spin_pullback_metric(&lattice, &g, reg).unwrap(), seed);
        prop_assert!(sym <= 1e-12 && q >= -1e-12);

        let state = MPSState::random(5, 2, seed).unwrap();
        for op in [metric_density_reference(&state).unwrap(), metric_mps_amplitude(&state).unwrap()] {
            let (sym, q) = symmetry_and_psd(&op, seed);
            prop_assert!(sym <= 1e-10 && q >= -1e-10);
        }
    }

    #[test]
    fn gradient_descent_direction_is_negated_gradient(g in prop::collection::vec(-1e3f64..1e3, 1..20)) {
        let d = gradient_descent_direction(&g);
        prop_assert!(d.iter().zip(&g).all(|(a, b)| a + b == 0.0));
    }

    #[test]
    fn accepted_steps_satisfy_armijo(seed in 0u64..1_000_000) {
        let p = RayleighProblem::new(RayleighInstance::random(10, seed).unwrap());
        let x = p.initial_point(seed + 1);
        let (c, g) = p.cost_and_gradient(&x).unwrap();
        let cfg = LineSearchConfig::default();
        let out = line_search(&p, &x, c, &g, &gradient_descent_direction(&g), &cfg).unwrap();
        prop_assert!((norm(&out.direction) - 1.0).abs() <= 1e-12);
        prop_assert!(out.cost_new <= c + cfg.armijo_c * out.step * dot(&out.direction, &g));
        prop_assert!(out.step <= cfg.initial_step);
    }

    #[test]
    fn optimizer_costs_never_increase(seed in 0u64..1_000_000, which in 0usize..4) {
        let p = RayleighProblem::new(RayleighInstance::random(12, seed).unwrap());
        let opt = match which {
            0 => OptimizerConfig::new(Method::Gd, 30),
            1 => OptimizerConfig::new(Method::NonlinearCg, 30),
            2 => OptimizerConfig::ngd(MetricId::RayleighPullback, 30),
            _ => OptimizerConfig::ngd(MetricId::Fisher, 30),
        };
        let x0 = ParameterVector::new(p.initial_point(seed + 1)).unwrap();
        let trace = optimize(&p, &x0, &opt, &LineSearchConfig::default()).unwrap();
        let mut prev = trace.initial_cost;
        for r in &trace.records {
            prop_assert!(r.cost <= prev);
            prop_assert!(r.step_size > 0.0);
            prev = r.cost;
        }
    }

    #[test]
    fn costs_are_scale_invariant(seed in 0u64..1_000_000, alpha in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
        let inst = RayleighInstance::random(9, seed).unwrap();
        let x = random_vec(9, seed + 1);
        let c = rayleigh_cost(&x, &inst).unwrap();
        prop_assert!((rayleigh_cost(&scaled(alpha, &x), &inst).unwrap() - c).abs() <= 1e-12 * c.abs().max(1.0));

        let g = LatticeGeometry::new(3, 3, true).unwrap();
        let lattice = SpinLattice::random(g.clone(), seed);
        let mut spins = lattice.spins().to_vec();
        spins[3..6].iter_mut().for_each(|v| *v *= alpha.abs());
        let c = spin_cost(&lattice).unwrap();
        let c2 = spin_cost(&SpinLattice::new(g, spins).unwrap()).unwrap();
        prop_assert!((c - c2).abs() <= 1e-12);

        let state = MPSState::random(5, 2, seed).unwrap();
        let data = pullback_ngd::problems::mps::TargetData {
            targets: pullback_ngd::problems::mps::RDMSet::new(vec![[0.05; 16]; 4]).unwrap(),
            noise_amplitude: 0.0,
            source_seed: 0,
        };
        let c = lsm_cost(&state, &data).unwrap();
        let s2 = MPSState::new(5, 2, &scaled(alpha, &state.params())).unwrap();
        prop_assert!((lsm_cost(&s2, &data).unwrap() - c).abs() <= 1e-12 * c);
    }

    #[test]
    fn spin_cost_is_bounded(seed in 0u64..1_000_000, w in 2usize..6, h in 2usize..6, periodic: bool) {
        let g = LatticeGeometry::new(w, h, periodic).unwrap();
        let c = spin_cost(&SpinLattice::random(g, seed)).unwrap();
        prop_assert!((-2.0..=2.0).contains(&c));
    }

    #[test]
    fn rdms_have_unit_trace_and_symmetry(seed in 0u64..1_000_000, length in 3usize..8, d in 1usize..4) {
        let set = reduced_density_matrices(&MPSState::random(length, d, seed).unwrap()).unwrap();
        prop_assert_eq!(set.bonds(), length - 1);
        for k in 0..set.bonds() {
            prop_assert!((set.trace(k) - 1.0).abs() <= 1e-12);
        }
        prop_assert!(set.max_asymmetry() <= 1e-12);
    }

    #[test]
    fn identity_ngd_reproduces_gd(seed in 0u64..1_000_000) {
        let p = SpinProblem::new(LatticeGeometry::new(4, 3, false).unwrap());
        let x0 = ParameterVector::new(p.initial_point(seed)).unwrap();
        let ls = LineSearchConfig::default();
        let mut ngd = OptimizerConfig::ngd(MetricId::Identity, 20);
        ngd.metric.ridge = pullback_ngd::optim::RidgePolicy::Fixed(0.0);
        let a = optimize(&p, &x0, &ngd, &ls).unwrap();
        let b = optimize(&p, &x0, &OptimizerConfig::new(Method::Gd, 20), &ls).unwrap();
        prop_assert_eq!(a.records.len(), b.records.len());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            prop_assert!((ra.cost - rb.cost).abs() <= 1e-12 * rb.cost.abs().max(1.0));
            prop_assert!(ra.step_size == rb.step_size);
        }
    }
}

#[test]
fn fisher_direction_is_parallel_to_gradient() {
    let inst = RayleighInstance::random(50, 1).unwrap();
    let cfg = CgSolverConfig::default();
    for k in 0..100 {
        let x = random_vec(50, 1000 + k);
        let g = rayleigh_gradient(&x, &inst).unwrap();
        let d = natural_direction(&g, &rayleigh_fisher_metric(&x, &inst).unwrap(), &cfg).unwrap();
        assert!(cosine(&d, &gradient_descent_direction(&g)) >= 1.0 - 1e-10);
    }
}

//! Analytic gradients against central finite differences.

mod common;

use common::{mps_fixture, random_vec, rel_err};
use pullback_ngd::optim::Problem;
use pullback_ngd::oracles::finite_difference_gradient;
use pullback_ngd::problems::mps::{lsm_cost, lsm_gradient, HilbertQuartic, MPSState, MpsProblem};
use pullback_ngd::problems::rayleigh::{rayleigh_cost, rayleigh_gradient, RayleighInstance};
use pullback_ngd::problems::spin::{LatticeGeometry, SpinProblem};

const H: f64 = 1e-5;
const TOL: f64 = 1e-6;

#[test]
fn fd_of_half_squared_norm_is_exact() {
    let x = [0.3, -1.2, 2.5];
    let g = finite_difference_gradient(|x| Ok(x.iter().map(|v| v * v).sum::<f64>() / 2.0), &x, H).unwrap();
    assert!(pullback_ngd::linalg::max_abs_diff(&g, &x) < 1e-10);
}

#[test]
fn rayleigh_gradient_matches_fd() {
    let inst = RayleighInstance::random(10, 1).unwrap();
    for s in 0..10 {
        let x = random_vec(10, 100 + s);
        let fd = finite_difference_gradient(|x| rayleigh_cost(x, &inst), &x, H).unwrap();
        let g = rayleigh_gradient(&x, &inst).unwrap();
        assert!(rel_err(&g, &fd, 1e-12) <= TOL);
    }
}

#[test]
fn spin_gradient_matches_fd() {
    let p = SpinProblem::new(LatticeGeometry::new(4, 4, false).unwrap());
    for s in 0..10 {
        let x = p.initial_point(200 + s);
        let fd = finite_difference_gradient(|x| p.cost(x), &x, H).unwrap();
        assert!(rel_err(&p.gradient(&x).unwrap(), &fd, 1e-12) <= TOL);
    }
}

#[test]
fn lsm_gradient_matches_fd_at_l6_d3() {
    for s in 0..10 {
        let (state, data) = mps_fixture(6, 3, 300 + s);
        let fd = finite_difference_gradient(
            |x| lsm_cost(&MPSState::new(6, 3, x).unwrap(), &data),
            &state.params(),
            H,
        )
        .unwrap();
        let g = lsm_gradient(&state, &data).unwrap();
        assert!(rel_err(&g, &fd, 1e-12) <= TOL, "seed {s}: {}", rel_err(&g, &fd, 1e-12));
    }
}

#[test]
fn lsm_gradient_at_l4_d2() {
    let (state, data) = mps_fixture(4, 2, 7);
    let p = MpsProblem::new(2, data.clone()).unwrap();
    let fd = finite_difference_gradient(|x| p.cost(x), &state.params(), H).unwrap();
    assert!(rel_err(&lsm_gradient(&state, &data).unwrap(), &fd, 1e-12) <= TOL);
}

#[test]
fn lsm_gradient_orthogonal_to_global_scaling() {
    let (state, data) = mps_fixture(6, 3, 11);
    let g = lsm_gradient(&state, &data).unwrap();
    let x = state.params();
    let d = pullback_ngd::linalg::dot(&g, &x);
    assert!(d.abs() <= 1e-8 * pullback_ngd::linalg::norm(&g) * pullback_ngd::linalg::norm(&x));
}

#[test]
fn quartic_gradient_and_hessian_match_fd() {
    let (_, data) = mps_fixture(5, 2, 12);
    let q = HilbertQuartic::new(5, data.targets.matrices().to_vec()).unwrap();
    let y = random_vec(32, 13);
    let fd = finite_difference_gradient(|y| Ok(q.cost(y)), &y, H).unwrap();
    assert!(rel_err(&q.gradient(&y), &fd, 1e-12) <= TOL);

    let u = random_vec(32, 14);
    let h = 1e-6;
    let plus: Vec<f64> = y.iter().zip(&u).map(|(a, b)| a + h * b).collect();
    let minus: Vec<f64> = y.iter().zip(&u).map(|(a, b)| a - h * b).collect();
    let fd_hu: Vec<f64> = q
        .gradient(&plus)
        .iter()
        .zip(q.gradient(&minus))
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    assert!(rel_err(&q.hessian_apply(&y, &u), &fd_hu, 1e-12) <= 1e-5);
}

#[test]
fn every_problem_cost_and_gradient_agree_with_separate_calls() {
    let (state, data) = mps_fixture(5, 2, 15);
    let p = MpsProblem::new(2, data).unwrap();
    let x = state.params();
    let (c, g) = p.cost_and_gradient(&x).unwrap();
    assert_eq!(c, p.cost(&x).unwrap());
    assert_eq!(g, p.gradient(&x).unwrap());
}

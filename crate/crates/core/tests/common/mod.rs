#![allow(dead_code)]

use pullback_ngd::linalg::{norm, sub};
use pullback_ngd::problems::mps::{generate_target_data, MPSState, TargetData};
use pullback_ngd::rng;

/// `‖a − b‖ / max(‖b‖, floor)`
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    norm(&sub(a, b)) / norm(b).max(floor)
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    rng::normal_vector(&mut rng::seeded(seed), n)
}

pub fn mps_fixture(length: usize, bond_dim: usize, seed: u64) -> (MPSState, TargetData) {
    let state = MPSState::random(length, bond_dim, seed).unwrap();
    let data = generate_target_data(length, 0.1, seed + 1000).unwrap();
    (state, data)
}

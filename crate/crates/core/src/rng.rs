//! Seeded randomness. Every random draw in the library goes through
//! [`seeded`], so identical seeds give identical runs on one platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vector(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn uniform_vector(rng: &mut SeededRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Uniformly distributed point on the unit sphere in `n` dimensions.
pub fn unit_sphere(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    loop {
        let mut v = normal_vector(rng, n);
        let nrm = crate::linalg::norm(&v);
        if nrm > 1e-12 {
            crate::linalg::scale(1.0 / nrm, &mut v);
            return v;
        }
    }
}

/// Rademacher (±1) probe vector.
pub fn rademacher(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

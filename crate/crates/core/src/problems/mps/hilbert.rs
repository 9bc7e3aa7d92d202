//! Maps into the dense `2^L`-dimensional Hilbert space and the quartic
//! reference cost defined there.

use super::chain::{self, Chain};
use super::dense;
use super::density::transpose_add;
use super::MPSState;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::metric::ReferenceMap;

/// Cached amplitudes at a fixed point.
pub(crate) struct HilbertPoint {
    pub w: Chain,
    /// `W/Z`
    pub y: Vec<f64>,
    pub z: f64,
}

impl HilbertPoint {
    pub fn new(w: Chain) -> Result<Self> {
        let mut y = dense::amplitudes(&w)?;
        let z = dot(&y, &y).sqrt();
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::InvalidArgument(format!("state norm is {z}")));
        }
        y.iter_mut().for_each(|v| *v /= z);
        Ok(Self { w, y, z })
    }

    /// `dW` for a parameter direction.
    pub fn amplitude_jvp(&self, v: &[f64]) -> Vec<f64> {
        let v = chain::unflatten_like(&self.w, v);
        dense::amplitudes(&chain::tangent(&self.w, &v)).expect("length checked at construction")
    }

    pub fn amplitude_vjp(&self, u: &[f64]) -> Vec<f64> {
        chain::flatten(&dense::overlap_gradient(&self.w, u).expect("length checked at construction"))
    }

    fn project(&self, u: &[f64]) -> Vec<f64> {
        let along = dot(&self.y, u);
        let mut out: Vec<f64> = u.iter().map(|v| v / self.z).collect();
        axpy(-along / self.z, &self.y, &mut out);
        out
    }

    /// `dY = (dW − Y(Y·dW))/Z`
    pub fn jvp(&self, v: &[f64]) -> Vec<f64> {
        self.project(&self.amplitude_jvp(v))
    }

    pub fn vjp(&self, u: &[f64]) -> Vec<f64> {
        self.amplitude_vjp(&self.project(u))
    }
}

/// Map from tensor entries to dense amplitudes, raw (`W`) or normalized (`W/Z`).
#[derive(Debug, Clone, Copy)]
pub struct AmplitudeMap {
    pub length: usize,
    pub bond_dim: usize,
    pub normalized: bool,
}

impl AmplitudeMap {
    fn point(&self, x: &[f64]) -> HilbertPoint {
        let state = MPSState::new(self.length, self.bond_dim, x).expect("parameter vector of MPS shape");
        HilbertPoint::new(state.chain).expect("state within the dense guard with nonzero norm")
    }
}

impl ReferenceMap for AmplitudeMap {
    fn dim_x(&self) -> usize {
        MPSState::param_count(self.length, self.bond_dim)
    }
    fn dim_y(&self) -> usize {
        1 << self.length
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let p = self.point(x);
        if self.normalized {
            p.y
        } else {
            p.y.iter().map(|v| v * p.z).collect()
        }
    }
    fn jvp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let p = self.point(x);
        if self.normalized {
            p.jvp(v)
        } else {
            p.amplitude_jvp(v)
        }
    }
    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let p = self.point(x);
        if self.normalized {
            p.vjp(w)
        } else {
            p.amplitude_vjp(w)
        }
    }
}

/// `L̄(Y) = (1/L) Σ_k ‖ρ_k(Y) − D̃_k‖²_F` with `ρ_k(Y) = Σ Y Y` on bond `k`.
///
/// Unlike the density map there is no normalization, so `L̄` is a quartic
/// polynomial in `Y`.
#[derive(Debug, Clone)]
pub struct HilbertQuartic {
    length: usize,
    targets: Vec<[f64; 16]>,
}

impl HilbertQuartic {
    pub fn new(length: usize, targets: Vec<[f64; 16]>) -> Result<Self> {
        dense::check_guard(length)?;
        if targets.len() + 1 != length {
            return Err(Error::DimensionMismatch {
                expected: length - 1,
                got: targets.len(),
            });
        }
        Ok(Self { length, targets })
    }

    fn residuals(&self, y: &[f64]) -> Vec<[f64; 16]> {
        self.targets
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let mut r = dense::rdm(y, y, self.length, k);
                r.iter_mut().zip(t).for_each(|(a, b)| *a -= b);
                r
            })
            .collect()
    }

    pub fn cost(&self, y: &[f64]) -> f64 {
        self.residuals(y)
            .iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / self.length as f64
    }

    /// `(2/L) Σ_k O_k(R_k + R_kᵀ) Y`
    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let c = 2.0 / self.length as f64;
        let mut out = vec![0.0; y.len()];
        for (k, r) in self.residuals(y).iter().enumerate() {
            dense::apply_two_site(&transpose_add(r), y, self.length, k, c, &mut out);
        }
        out
    }

    /// `(2/L) Σ_k [O_k(R_k + R_kᵀ) u + O_k(dR_k + dR_kᵀ) Y]`, `dR_k = ρ_k(u,Y) + ρ_k(Y,u)`.
    pub fn hessian_apply(&self, y: &[f64], u: &[f64]) -> Vec<f64> {
        let c = 2.0 / self.length as f64;
        let mut out = vec![0.0; y.len()];
        for (k, r) in self.residuals(y).iter().enumerate() {
            dense::apply_two_site(&transpose_add(r), u, self.length, k, c, &mut out);
            let dr = transpose_add(&dense::rdm(u, y, self.length, k));
            dense::apply_two_site(&transpose_add(&dr), y, self.length, k, c, &mut out);
        }
        out
    }
}

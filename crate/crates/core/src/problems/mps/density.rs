//! Two-site density matrices `D_k = N_k / Z²` as a differentiable map of the
//! tensor entries.

use super::chain::{self, Chain, PairEnvs};
use super::MPSState;
use crate::error::{Error, Result};
use crate::metric::{MetricOperator, ReferenceMap};

pub(crate) fn symmetrize(c: &[f64; 16]) -> [f64; 16] {
    let mut out = [0.0; 16];
    for i in 0..4 {
        for j in 0..4 {
            out[i * 4 + j] = 0.5 * (c[i * 4 + j] + c[j * 4 + i]);
        }
    }
    out
}

/// `A + Aᵀ`
pub(crate) fn transpose_add(a: &[f64; 16]) -> [f64; 16] {
    let mut out = [0.0; 16];
    for i in 0..4 {
        for j in 0..4 {
            out[i * 4 + j] = a[i * 4 + j] + a[j * 4 + i];
        }
    }
    out
}

/// Everything the density map needs at a fixed point `W`.
pub(crate) struct DensityPoint {
    pub w: Chain,
    envs: PairEnvs,
    pub z2: f64,
    /// Unnormalized `N_k = Σ W W` per bond.
    pub n: Vec<[f64; 16]>,
}

impl DensityPoint {
    pub fn new(w: Chain) -> Result<Self> {
        let envs = PairEnvs::new(&w, &w);
        let z2 = envs.overlap();
        if !(z2 > 0.0) || !z2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "state norm squared is {z2}; densities are undefined"
            )));
        }
        let n = (0..w.len() - 1).map(|k| envs.rdm(&w, &w, k)).collect();
        Ok(Self { w, envs, z2, n })
    }

    pub fn from_state(state: &MPSState) -> Result<Self> {
        Self::new(state.chain.clone())
    }

    pub fn bonds(&self) -> usize {
        self.n.len()
    }

    pub fn density(&self, k: usize) -> [f64; 16] {
        self.n[k].map(|v| v / self.z2)
    }

    pub fn densities(&self) -> Vec<[f64; 16]> {
        (0..self.bonds()).map(|k| self.density(k)).collect()
    }

    /// `dD_k = (N(T,W) + N(W,T))/Z² − N_k·2⟨T|W⟩/Z⁴`, flattened bond-major.
    pub fn jvp(&self, v: &[f64]) -> Vec<f64> {
        let v = chain::unflatten_like(&self.w, v);
        let t = chain::tangent(&self.w, &v);
        let envs = PairEnvs::new(&t, &self.w);
        let dz2 = 2.0 * envs.overlap();
        let inv = 1.0 / self.z2;
        let mut out = Vec::with_capacity(16 * self.bonds());
        for (k, nk) in self.n.iter().enumerate() {
            let dn = transpose_add(&envs.rdm(&t, &self.w, k));
            out.extend(
                dn.iter()
                    .zip(nk)
                    .map(|(d, n)| d * inv - n * dz2 * inv * inv),
            );
        }
        out
    }

    /// Adjoint of [`Self::jvp`]: maps bond-major 4×4 cotangents to parameter space.
    pub fn vjp(&self, c: &[f64]) -> Vec<f64> {
        let cs: Vec<[f64; 16]> = c
            .chunks_exact(16)
            .map(|b| symmetrize(b.try_into().expect("chunk of 16")))
            .collect();
        let coef: f64 = cs
            .iter()
            .zip(&self.n)
            .map(|(ck, nk)| ck.iter().zip(nk).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        let phi = chain::apply_two_site_sum(&self.w, &cs);
        let g1 = chain::flatten(&PairEnvs::new(&phi, &self.w).grads(&phi));
        let g2 = chain::flatten(&self.envs.grads(&self.w));
        let a = 2.0 / self.z2;
        let b = 2.0 * coef / (self.z2 * self.z2);
        g1.iter().zip(&g2).map(|(x, y)| a * x - b * y).collect()
    }

    /// `(1/L) Σ_k ‖D_k − D̃_k‖²_F` and its cotangents `(2/L)(D_k − D̃_k)`.
    pub fn residuals(&self, targets: &[[f64; 16]]) -> (f64, Vec<f64>) {
        let length = (self.bonds() + 1) as f64;
        let mut cost = 0.0;
        let mut cot = Vec::with_capacity(16 * self.bonds());
        for (k, t) in targets.iter().enumerate() {
            let d = self.density(k);
            for (a, b) in d.iter().zip(t) {
                let r = a - b;
                cost += r * r;
                cot.push(2.0 * r / length);
            }
        }
        (cost / length, cot)
    }

    /// `v ↦ Σ_k VJP_k(JVP_k(v))`.
    pub fn into_metric(self) -> MetricOperator<'static> {
        let dim = self.w.iter().map(|s| s.len()).sum();
        MetricOperator::new(dim, move |v| self.vjp(&self.jvp(v)))
    }
}

/// Map from tensor entries to the stacked density matrices, `16(L−1)` outputs.
#[derive(Debug, Clone, Copy)]
pub struct DensityMap {
    pub length: usize,
    pub bond_dim: usize,
}

impl DensityMap {
    fn point(&self, x: &[f64]) -> DensityPoint {
        let state = MPSState::new(self.length, self.bond_dim, x).expect("parameter vector of MPS shape");
        DensityPoint::from_state(&state).expect("state with nonzero norm")
    }
}

impl ReferenceMap for DensityMap {
    fn dim_x(&self) -> usize {
        MPSState::param_count(self.length, self.bond_dim)
    }
    fn dim_y(&self) -> usize {
        16 * (self.length - 1)
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.point(x).densities().concat()
    }
    fn jvp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.point(x).jvp(v)
    }
    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        self.point(x).vjp(w)
    }
}

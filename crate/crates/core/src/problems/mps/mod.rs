//! Least-squares reconstruction of two-site density matrices with a matrix
//! product state.
//!
//! The ansatz is an open chain of `L` real tensors with bond dimension `D`:
//!
//! `W_s = A¹[s₁] A²[s₂] ⋯ Aᴸ[s_L]`
//!
//! and the cost compares its normalized two-site density matrices with
//! measured targets:
//!
//! `L(x) = (1/L) Σ_k ‖D_{k,k+1}(x) − D̃_{k,k+1}‖²_F`
//!
//! Bonds are indexed from zero: bond `k` couples sites `k` and `k+1`.

mod chain;
mod dense;
mod density;
mod hilbert;
mod target;

use chain::{Chain, PairEnvs, Site};
pub use dense::DENSE_GUARD;
pub use density::DensityMap;
use density::DensityPoint;
pub use hilbert::{AmplitudeMap, HilbertQuartic};
use hilbert::HilbertPoint;
pub use target::{generate_target_data, heisenberg_ground_state_rdms, RDMSet, TargetData, GROUND_STATE_TOL};

use crate::error::{Error, Result};
use crate::metric::{estimate_min_eigenvalue, HessianRegularization, MetricOperator};
use crate::optim::{IdentityBuilder, MetricBuilder, MetricId, MetricSettings, Problem};
use crate::rng;

/// Tensors of an open-boundary MPS. Site `j` has shape `2 × Dl × Dr` with
/// `Dl = 1` on the first site and `Dr = 1` on the last.
#[derive(Debug, Clone, PartialEq)]
pub struct MPSState {
    length: usize,
    bond_dim: usize,
    chain: Chain,
}

impl MPSState {
    /// `2·2·D + (L−2)·2·D²`
    pub fn param_count(length: usize, bond_dim: usize) -> usize {
        4 * bond_dim + length.saturating_sub(2) * 2 * bond_dim * bond_dim
    }

    fn bond_dims(length: usize, bond_dim: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..length).map(move |j| {
            let dl = if j == 0 { 1 } else { bond_dim };
            let dr = if j + 1 == length { 1 } else { bond_dim };
            (dl, dr)
        })
    }

    /// Builds a state from a flat parameter vector (site-major, then `s`, row, column).
    pub fn new(length: usize, bond_dim: usize, params: &[f64]) -> Result<Self> {
        if length < 3 {
            return Err(Error::InvalidArgument(format!("MPS length must be at least 3, got {length}")));
        }
        if bond_dim == 0 {
            return Err(Error::InvalidArgument("bond dimension must be positive".into()));
        }
        let expected = Self::param_count(length, bond_dim);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        if !crate::linalg::all_finite(params) {
            return Err(Error::NonFinite("MPS parameters"));
        }
        let mut off = 0;
        let chain = Self::bond_dims(length, bond_dim)
            .map(|(dl, dr)| {
                let site = Site::from_slice(dl, dr, &params[off..off + 2 * dl * dr]);
                off += 2 * dl * dr;
                site
            })
            .collect();
        Ok(Self {
            length,
            bond_dim,
            chain,
        })
    }

    /// I.i.d. normal entries with standard deviation `1/√D`.
    pub fn random(length: usize, bond_dim: usize, seed: u64) -> Result<Self> {
        let mut r = rng::seeded(seed);
        let sd = 1.0 / (bond_dim.max(1) as f64).sqrt();
        let params: Vec<f64> = rng::normal_vector(&mut r, Self::param_count(length, bond_dim))
            .into_iter()
            .map(|v| sd * v)
            .collect();
        Self::new(length, bond_dim, &params)
    }

    /// Bond-dimension-1 product state with spin `spins[j]` (0 = up) on site `j`.
    pub fn product(spins: &[usize]) -> Result<Self> {
        let mut params = Vec::with_capacity(2 * spins.len());
        for &s in spins {
            if s > 1 {
                return Err(Error::InvalidArgument(format!("spin index {s} is not 0 or 1")));
            }
            params.extend(if s == 0 { [1.0, 0.0] } else { [0.0, 1.0] });
        }
        Self::new(spins.len(), 1, &params)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn num_params(&self) -> usize {
        Self::param_count(self.length, self.bond_dim)
    }

    pub fn params(&self) -> Vec<f64> {
        chain::flatten(&self.chain)
    }

    /// `(Dl, Dr)` of site `j`.
    pub fn tensor_shape(&self, j: usize) -> (usize, usize) {
        (self.chain[j].dl(), self.chain[j].dr())
    }

    /// Entries of site `j` in `[s][a][b]` order.
    pub fn tensor(&self, j: usize) -> Vec<f64> {
        let mut out = Vec::new();
        self.chain[j].extend_into(&mut out);
        out
    }

    /// Multiplies every entry of site `j` by `alpha`.
    pub fn scale_tensor(&mut self, j: usize, alpha: f64) {
        for m in &mut self.chain[j].m {
            m.data.iter_mut().for_each(|v| *v *= alpha);
        }
    }

    /// `⟨W|W⟩ = Z²`
    pub fn norm_squared(&self) -> f64 {
        chain::overlap(&self.chain, &self.chain)
    }
}

/// All `2^L` amplitudes, basis index `Σ_j s_j 2^(L-1-j)`.
pub fn mps_amplitudes(state: &MPSState) -> Result<Vec<f64>> {
    dense::amplitudes(&state.chain)
}

/// `D_{k,k+1}` from environment contractions, without dense amplitudes.
pub fn reduced_density_matrix(state: &MPSState, bond: usize) -> Result<[f64; 16]> {
    if bond + 1 >= state.length {
        return Err(Error::InvalidArgument(format!(
            "bond {bond} out of range for {} sites",
            state.length
        )));
    }
    let envs = PairEnvs::new(&state.chain, &state.chain);
    let z2 = envs.overlap();
    if !(z2 > 0.0) {
        return Err(Error::InvalidArgument("state has zero norm".into()));
    }
    Ok(envs.rdm(&state.chain, &state.chain, bond).map(|v| v / z2))
}

/// Density matrices on every bond.
pub fn reduced_density_matrices(state: &MPSState) -> Result<RDMSet> {
    RDMSet::new(DensityPoint::from_state(state)?.densities())
}

fn check_data(state: &MPSState, data: &TargetData) -> Result<()> {
    if data.length() != state.length {
        return Err(Error::DimensionMismatch {
            expected: state.length - 1,
            got: data.targets.bonds(),
        });
    }
    Ok(())
}

/// `(1/L) Σ_k ‖D_k − D̃_k‖²_F`
pub fn lsm_cost(state: &MPSState, data: &TargetData) -> Result<f64> {
    check_data(state, data)?;
    Ok(DensityPoint::from_state(state)?.residuals(data.targets.matrices()).0)
}

pub fn lsm_gradient(state: &MPSState, data: &TargetData) -> Result<Vec<f64>> {
    check_data(state, data)?;
    let p = DensityPoint::from_state(state)?;
    let (_, cot) = p.residuals(data.targets.matrices());
    Ok(p.vjp(&cot))
}

/// Pullback of the identity on the stacked density matrices.
pub fn metric_density_reference(state: &MPSState) -> Result<MetricOperator<'static>> {
    Ok(DensityPoint::from_state(state)?.into_metric())
}

/// Pullback of the identity on normalized amplitudes `Y = W/Z`.
pub fn metric_hilbert_identity(state: &MPSState) -> Result<MetricOperator<'static>> {
    let p = HilbertPoint::new(state.chain.clone())?;
    Ok(MetricOperator::new(state.num_params(), move |v| p.vjp(&p.jvp(v))))
}

/// Shift for the Hilbert-space reference Hessian at `state`.
pub fn hilbert_hessian_regularization(
    state: &MPSState,
    data: &TargetData,
    power_iters: usize,
    seed: u64,
) -> Result<HessianRegularization> {
    check_data(state, data)?;
    let quartic = HilbertQuartic::new(state.length, data.targets.matrices().to_vec())?;
    let y = HilbertPoint::new(state.chain.clone())?.y;
    let eh = estimate_min_eigenvalue(|u| quartic.hessian_apply(&y, u), y.len(), power_iters, seed)?;
    Ok(HessianRegularization::from_estimate(eh, power_iters))
}

/// Pullback of `∇²L̄(Y) + εI` on normalized amplitudes.
pub fn metric_hilbert_hessian(
    state: &MPSState,
    data: &TargetData,
    reg: HessianRegularization,
) -> Result<MetricOperator<'static>> {
    check_data(state, data)?;
    let quartic = HilbertQuartic::new(state.length, data.targets.matrices().to_vec())?;
    let p = HilbertPoint::new(state.chain.clone())?;
    Ok(MetricOperator::new(state.num_params(), move |v| {
        let u = p.jvp(v);
        let mut h = quartic.hessian_apply(&p.y, &u);
        crate::linalg::axpy(reg.epsilon, &u, &mut h);
        p.vjp(&h)
    }))
}

/// Pullback of the identity on raw amplitudes `W`, by transfer-matrix
/// contraction of the tangent chain against `W`.
pub fn metric_mps_amplitude(state: &MPSState) -> Result<MetricOperator<'static>> {
    let w = state.chain.clone();
    Ok(MetricOperator::new(state.num_params(), move |v| {
        let t = chain::tangent(&w, &chain::unflatten_like(&w, v));
        chain::flatten(&PairEnvs::new(&t, &w).grads(&t))
    }))
}

/// The least-squares cost over flat MPS parameters.
#[derive(Debug, Clone)]
pub struct MpsProblem {
    length: usize,
    bond_dim: usize,
    data: TargetData,
}

impl MpsProblem {
    pub fn new(bond_dim: usize, data: TargetData) -> Result<Self> {
        let length = data.length();
        // Validates length and bond dimension.
        MPSState::new(length, bond_dim, &vec![0.0; MPSState::param_count(length, bond_dim)])?;
        Ok(Self {
            length,
            bond_dim,
            data,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn data(&self) -> &TargetData {
        &self.data
    }

    pub fn state(&self, x: &[f64]) -> Result<MPSState> {
        MPSState::new(self.length, self.bond_dim, x)
    }

    pub fn initial_point(&self, seed: u64) -> Vec<f64> {
        MPSState::random(self.length, self.bond_dim, seed)
            .expect("validated shape")
            .params()
    }

    /// Gradient of `(1/L)‖Y − D̃‖²` on the stacked density matrices.
    pub fn reference_gradient(&self, y: &[f64]) -> Vec<f64> {
        let c = 2.0 / self.length as f64;
        y.iter()
            .zip(self.data.targets.matrices().concat())
            .map(|(a, b)| c * (a - b))
            .collect()
    }
}

enum MpsMetric {
    Density,
    HilbertIdentity,
    HilbertHessian(HessianRegularization),
    Amplitude,
}

struct MpsBuilder<'a> {
    problem: &'a MpsProblem,
    kind: MpsMetric,
    settings: MetricSettings,
    seed: u64,
}

impl MetricBuilder for MpsBuilder<'_> {
    fn metric_at(&self, x: &[f64]) -> Result<MetricOperator<'_>> {
        let state = self.problem.state(x)?;
        let op = match &self.kind {
            MpsMetric::Density => metric_density_reference(&state)?,
            MpsMetric::HilbertIdentity => metric_hilbert_identity(&state)?,
            MpsMetric::HilbertHessian(reg) => metric_hilbert_hessian(&state, &self.problem.data, *reg)?,
            MpsMetric::Amplitude => metric_mps_amplitude(&state)?,
        };
        Ok(self.settings.apply_ridge(op, self.seed))
    }

    fn settings(&self) -> Vec<(String, f64)> {
        match &self.kind {
            MpsMetric::HilbertHessian(reg) => vec![
                ("epsilon".into(), reg.epsilon),
                ("epsilon_h_estimate".into(), reg.epsilon_h_estimate),
                ("power_iters".into(), reg.power_iters as f64),
            ],
            _ => Vec::new(),
        }
    }
}

impl Problem for MpsProblem {
    fn dim(&self) -> usize {
        MPSState::param_count(self.length, self.bond_dim)
    }

    fn cost(&self, x: &[f64]) -> Result<f64> {
        lsm_cost(&self.state(x)?, &self.data)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        lsm_gradient(&self.state(x)?, &self.data)
    }

    fn cost_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = DensityPoint::from_state(&self.state(x)?)?;
        let (cost, cot) = p.residuals(self.data.targets.matrices());
        Ok((cost, p.vjp(&cot)))
    }

    fn supported_metrics(&self) -> Vec<MetricId> {
        let mut ids = vec![MetricId::Identity, MetricId::Density, MetricId::MpsAmplitude];
        if self.length <= DENSE_GUARD {
            ids.extend([MetricId::HilbertIdentity, MetricId::HilbertHessian]);
        }
        ids
    }

    fn metric_builder(
        &self,
        id: MetricId,
        x0: &[f64],
        settings: &MetricSettings,
        seed: u64,
    ) -> Result<Box<dyn MetricBuilder + '_>> {
        let kind = match id {
            MetricId::Identity => return Ok(Box::new(IdentityBuilder(self.dim()))),
            MetricId::Density => MpsMetric::Density,
            MetricId::MpsAmplitude => MpsMetric::Amplitude,
            MetricId::HilbertIdentity => {
                dense::check_guard(self.length)?;
                MpsMetric::HilbertIdentity
            }
            MetricId::HilbertHessian => MpsMetric::HilbertHessian(hilbert_hessian_regularization(
                &self.state(x0)?,
                &self.data,
                settings.power_iters,
                seed,
            )?),
            other => return Err(Error::UnknownMetric(other.to_string())),
        };
        Ok(Box::new(MpsBuilder {
            problem: self,
            kind,
            settings: *settings,
            seed,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_and_shapes() {
        let s = MPSState::random(5, 3, 1).unwrap();
        assert_eq!(s.num_params(), 12 + 3 * 18);
        assert_eq!(s.params().len(), s.num_params());
        assert_eq!(s.tensor_shape(0), (1, 3));
        assert_eq!(s.tensor_shape(2), (3, 3));
        assert_eq!(s.tensor_shape(4), (3, 1));
        assert!(MPSState::new(2, 2, &[0.0; 8]).is_err());
        assert!(MPSState::new(3, 2, &[0.0; 3]).is_err());
    }

    #[test]
    fn product_state_amplitudes() {
        let s = MPSState::product(&[0, 0, 0]).unwrap();
        let w = mps_amplitudes(&s).unwrap();
        assert_eq!(w, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let d = reduced_density_matrix(&s, 1).unwrap();
        let mut expected = [0.0; 16];
        expected[0] = 1.0;
        assert_eq!(d, expected);
        assert!(reduced_density_matrix(&s, 2).is_err());
    }

    #[test]
    fn perfect_fit_has_zero_cost_and_gradient() {
        let s = MPSState::random(6, 2, 4).unwrap();
        let data = TargetData {
            targets: reduced_density_matrices(&s).unwrap(),
            noise_amplitude: 0.0,
            source_seed: 0,
        };
        assert!(lsm_cost(&s, &data).unwrap() < 1e-28);
        assert!(lsm_gradient(&s, &data).unwrap().iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn rdm_trace_and_symmetry() {
        let s = MPSState::random(7, 3, 9).unwrap();
        let set = reduced_density_matrices(&s).unwrap();
        for k in 0..set.bonds() {
            assert!((set.trace(k) - 1.0).abs() < 1e-12);
        }
        assert!(set.max_asymmetry() < 1e-12);
    }

    #[test]
    fn target_text_round_trip() {
        let data = generate_target_data(4, 0.1, 5).unwrap();
        let back = TargetData::parse(&data.to_text()).unwrap();
        assert_eq!(back, data);
        assert!(TargetData::parse("3 0.1 1\n1 2 3").is_err());
    }
}

//! Smallest eigenvalue of a real symmetric matrix by minimizing the
//! Rayleigh quotient `L(x) = xᵀHx / xᵀx`.
//!
//! The reference space is the unit sphere, reached through `Y = x/‖x‖`.
//! There the cost is the quadratic form `YᵀHY`, whose Hessian (shifted to be
//! positive definite) pulls back to the `rayleigh_pullback` metric. The Fisher
//! metric of the Born distribution `p_s = x_s²/‖x‖²` is also available; its
//! natural direction is parallel to the plain gradient.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::metric::{
    fisher_metric, hessian_reference, pullback_metric, HessianRegularization, MetricOperator,
    Outcome, ReferenceMap,
};
use crate::optim::{IdentityBuilder, MetricBuilder, MetricId, MetricSettings, Problem};
use crate::rng;

/// A real symmetric `n × n` matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RayleighInstance {
    n: usize,
    h: Vec<f64>,
    seed: u64,
    symmetrized: bool,
}

impl RayleighInstance {
    /// Gaussian matrix `M` with i.i.d. standard normal entries, symmetrized
    /// as `(M + Mᵀ)/2`.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::seeded(seed);
        let m = rng::normal_vector(&mut rng, n * n);
        let mut inst = Self::from_matrix(n, m)?;
        inst.seed = seed;
        inst.symmetrized = false;
        Ok(inst)
    }

    /// Accepts any square matrix; asymmetric input is replaced by its
    /// symmetric part (see [`RayleighInstance::was_symmetrized`]).
    pub fn from_matrix(n: usize, data: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("matrix size {n} < 2")));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        if !crate::linalg::all_finite(&data) {
            return Err(Error::NonFinite("matrix entries"));
        }
        let mut h = data;
        let mut symmetrized = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (h[i * n + j], h[j * n + i]);
                if a != b {
                    symmetrized = true;
                    let s = 0.5 * (a + b);
                    h[i * n + j] = s;
                    h[j * n + i] = s;
                }
            }
        }
        Ok(Self {
            n,
            h,
            seed: 0,
            symmetrized,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &[f64] {
        &self.h
    }

    /// Whether the input had to be symmetrized.
    pub fn was_symmetrized(&self) -> bool {
        self.symmetrized
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.h.chunks_exact(self.n).map(|row| dot(row, v)).collect()
    }

    /// Parses the textual matrix format: `n`, then `n²` reals, row-major.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let n: usize = tokens
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("matrix size: {e}")))?;
        let data = tokens
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("`{t}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_matrix(n, data)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for row in self.h.chunks_exact(self.n) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

fn check_point(x: &[f64], inst: &RayleighInstance) -> Result<f64> {
    if x.len() != inst.n {
        return Err(Error::DimensionMismatch {
            expected: inst.n,
            got: x.len(),
        });
    }
    let xx = dot(x, x);
    if xx == 0.0 {
        return Err(Error::InvalidArgument("Rayleigh quotient at x = 0".into()));
    }
    Ok(xx)
}

pub fn rayleigh_cost(x: &[f64], inst: &RayleighInstance) -> Result<f64> {
    let xx = check_point(x, inst)?;
    Ok(dot(x, &inst.apply(x)) / xx)
}

/// `2(Hx − L(x)·x)/‖x‖²`, orthogonal to `x`.
pub fn rayleigh_gradient(x: &[f64], inst: &RayleighInstance) -> Result<Vec<f64>> {
    let xx = check_point(x, inst)?;
    let hx = inst.apply(x);
    let l = dot(x, &hx) / xx;
    Ok(hx
        .iter()
        .zip(x)
        .map(|(h, xi)| 2.0 * (h - l * xi) / xx)
        .collect())
}

/// `Y = x/‖x‖` with Jacobian `(I − YYᵀ)/‖x‖`, which is symmetric.
#[derive(Debug, Clone, Copy)]
pub struct NormalizedVectorMap {
    pub n: usize,
}

impl NormalizedVectorMap {
    fn project(x: &[f64], v: &[f64]) -> Vec<f64> {
        let z = norm(x);
        let yv = dot(x, v) / z;
        x.iter()
            .zip(v)
            .map(|(xi, vi)| (vi - (xi / z) * yv) / z)
            .collect()
    }
}

impl ReferenceMap for NormalizedVectorMap {
    fn dim_x(&self) -> usize {
        self.n
    }
    fn dim_y(&self) -> usize {
        self.n
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let z = norm(x);
        x.iter().map(|v| v / z).collect()
    }
    fn jvp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        Self::project(x, v)
    }
    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        Self::project(x, w)
    }
}

/// Shift for `H`: `ε = |λ_min(H)| + 0.1`, with `λ_min` estimated by power iteration.
pub fn estimate_regularization(
    inst: &RayleighInstance,
    power_iters: usize,
    seed: u64,
) -> Result<HessianRegularization> {
    HessianRegularization::estimate(|u| inst.apply(u), inst.n, power_iters, seed)
}

/// `v ↦ Jᵀ(H + εI)J v` for the normalized-vector map.
pub fn rayleigh_pullback_metric<'a>(
    x: &[f64],
    inst: &'a RayleighInstance,
    reg: HessianRegularization,
) -> Result<MetricOperator<'a>> {
    check_point(x, inst)?;
    let reference = hessian_reference(move |_y: &[f64], u: &[f64]| inst.apply(u), reg);
    pullback_metric(NormalizedVectorMap { n: inst.n }, reference, x, 0.0)
}

/// Born distribution `p_s = x_s²/‖x‖²` with scores `2/x_s·e_s − 2x/‖x‖²`.
pub fn born_model(x: &[f64]) -> Result<Vec<Outcome>> {
    let zz = dot(x, x);
    if zz == 0.0 {
        return Err(Error::InvalidArgument("Born model at x = 0".into()));
    }
    x.iter()
        .enumerate()
        .map(|(s, &xs)| {
            if xs == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "log-derivative undefined: x[{s}] = 0"
                )));
            }
            let mut score: Vec<f64> = x.iter().map(|xi| -2.0 * xi / zz).collect();
            score[s] += 2.0 / xs;
            Ok(Outcome {
                probability: xs * xs / zz,
                score,
            })
        })
        .collect()
}

/// Fisher metric of the Born distribution; densely `(4/Z²)(I − xxᵀ/Z²)`.
pub fn rayleigh_fisher_metric(x: &[f64], inst: &RayleighInstance) -> Result<MetricOperator<'static>> {
    check_point(x, inst)?;
    fisher_metric(born_model, x)
}

/// Minimal-eigenvalue problem with its metrics.
#[derive(Debug, Clone)]
pub struct RayleighProblem {
    pub instance: RayleighInstance,
}

impl RayleighProblem {
    pub fn new(instance: RayleighInstance) -> Self {
        Self { instance }
    }

    /// Uniform random start on the unit sphere.
    pub fn initial_point(&self, seed: u64) -> Vec<f64> {
        rng::unit_sphere(&mut rng::seeded(seed), self.instance.n)
    }

    /// Gradient of the reference cost `YᵀHY`, i.e. `2HY`.
    pub fn reference_gradient(&self, y: &[f64]) -> Vec<f64> {
        self.instance.apply(y).into_iter().map(|v| 2.0 * v).collect()
    }
}

struct PullbackBuilder<'a> {
    inst: &'a RayleighInstance,
    reg: HessianRegularization,
    settings: MetricSettings,
    seed: u64,
}

impl MetricBuilder for PullbackBuilder<'_> {
    fn metric_at(&self, x: &[f64]) -> Result<MetricOperator<'_>> {
        let op = rayleigh_pullback_metric(x, self.inst, self.reg)?;
        Ok(self.settings.apply_ridge(op, self.seed))
    }

    fn settings(&self) -> Vec<(String, f64)> {
        vec![
            ("epsilon".into(), self.reg.epsilon),
            ("epsilon_h_estimate".into(), self.reg.epsilon_h_estimate),
            ("power_iters".into(), self.reg.power_iters as f64),
        ]
    }
}

struct FisherBuilder<'a>(&'a RayleighInstance);

impl MetricBuilder for FisherBuilder<'_> {
    fn metric_at(&self, x: &[f64]) -> Result<MetricOperator<'_>> {
        rayleigh_fisher_metric(x, self.0)
    }
}

impl Problem for RayleighProblem {
    fn dim(&self) -> usize {
        self.instance.n
    }

    fn cost(&self, x: &[f64]) -> Result<f64> {
        rayleigh_cost(x, &self.instance)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        rayleigh_gradient(x, &self.instance)
    }

    fn supported_metrics(&self) -> Vec<MetricId> {
        vec![MetricId::Identity, MetricId::RayleighPullback, MetricId::Fisher]
    }

    fn metric_builder(
        &self,
        id: MetricId,
        _x0: &[f64],
        settings: &MetricSettings,
        seed: u64,
    ) -> Result<Box<dyn MetricBuilder + '_>> {
        match id {
            MetricId::Identity => Ok(Box::new(IdentityBuilder(self.instance.n))),
            MetricId::RayleighPullback => Ok(Box::new(PullbackBuilder {
                inst: &self.instance,
                reg: estimate_regularization(&self.instance, settings.power_iters, seed)?,
                settings: *settings,
                seed,
            })),
            MetricId::Fisher => Ok(Box::new(FisherBuilder(&self.instance))),
            other => Err(Error::UnknownMetric(other.to_string())),
        }
    }
}

//! Matrix-free metrics on parameter space.
//!
//! A metric is only ever touched through operator–vector products. The
//! central construction is the pullback `G_X = Jᵀ G_Y J` of a metric `G_Y`
//! on a reference space through the Jacobian `J` of a map `f: X → Y`. The
//! map supplies Jacobian–vector products (`jvp`) and their adjoints (`vjp`),
//! so neither `J` nor `G_X` is ever materialized.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, scale};
use crate::rng;

/// A symmetric linear operator given by its action on vectors.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Vec<f64>;
}

type ApplyFn<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync + 'a>;

/// Symmetric positive-(semi)definite operator `v ↦ G·v + ridge·v`.
pub struct MetricOperator<'a> {
    dim: usize,
    ridge: f64,
    apply: ApplyFn<'a>,
}

impl<'a> MetricOperator<'a> {
    pub fn new<F>(dim: usize, apply: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'a,
    {
        Self {
            dim,
            ridge: 0.0,
            apply: Box::new(apply),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, |v| v.to_vec())
    }

    /// Replaces the ridge term. Negative ridges are clamped to zero.
    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge.max(0.0);
        self
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }
}

impl LinearOperator for MetricOperator<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = (self.apply)(v);
        if self.ridge != 0.0 {
            axpy(self.ridge, v, &mut out);
        }
        out
    }
}

impl std::fmt::Debug for MetricOperator<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricOperator")
            .field("dim", &self.dim)
            .field("ridge", &self.ridge)
            .finish_non_exhaustive()
    }
}

/// A differentiable map `f: X → Y` from parameters into a reference space.
///
/// `jvp(x, v)` returns `J v` and `vjp(x, w)` returns `Jᵀ w`, where
/// `J[α][i] = ∂y^α / ∂x^i` is evaluated at `x`.
pub trait ReferenceMap: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    fn jvp(&self, x: &[f64], v: &[f64]) -> Vec<f64>;
    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64>;
}

impl<T: ReferenceMap + ?Sized> ReferenceMap for &T {
    fn dim_x(&self) -> usize {
        (**self).dim_x()
    }
    fn dim_y(&self) -> usize {
        (**self).dim_y()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        (**self).eval(x)
    }
    fn jvp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        (**self).jvp(x, v)
    }
    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        (**self).vjp(x, w)
    }
}

/// Identity map `y = x`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityMap(pub usize);

impl ReferenceMap for IdentityMap {
    fn dim_x(&self) -> usize {
        self.0
    }
    fn dim_y(&self) -> usize {
        self.0
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn jvp(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }
    fn vjp(&self, _x: &[f64], w: &[f64]) -> Vec<f64> {
        w.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMetricKind {
    Euclidean,
    HessianRegularized,
    Fisher,
    Custom,
}

/// A metric `G_Y(y)` on the reference space.
pub trait ReferenceMetric: Send + Sync {
    fn kind(&self) -> ReferenceMetricKind;
    fn apply(&self, y: &[f64], u: &[f64]) -> Vec<f64>;
}

impl<T: ReferenceMetric + ?Sized> ReferenceMetric for &T {
    fn kind(&self) -> ReferenceMetricKind {
        (**self).kind()
    }
    fn apply(&self, y: &[f64], u: &[f64]) -> Vec<f64> {
        (**self).apply(y, u)
    }
}

/// The flat metric `G_Y = I`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

pub fn euclidean_reference() -> Euclidean {
    Euclidean
}

impl ReferenceMetric for Euclidean {
    fn kind(&self) -> ReferenceMetricKind {
        ReferenceMetricKind::Euclidean
    }
    fn apply(&self, _y: &[f64], u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }
}

/// Shift that makes a reference Hessian positive definite.
///
/// `epsilon = |epsilon_h_estimate| + 0.1`, where the estimate is the
/// (approximate) minimal eigenvalue of the Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianRegularization {
    pub epsilon: f64,
    pub epsilon_h_estimate: f64,
    pub power_iters: usize,
}

impl HessianRegularization {
    pub const MARGIN: f64 = 0.1;
    pub const DEFAULT_POWER_ITERS: usize = 100;

    pub fn from_estimate(epsilon_h_estimate: f64, power_iters: usize) -> Self {
        Self {
            epsilon: epsilon_h_estimate.abs() + Self::MARGIN,
            epsilon_h_estimate,
            power_iters,
        }
    }

    /// Runs [`estimate_min_eigenvalue`] on `hessian` and applies the shift rule.
    pub fn estimate<F>(hessian: F, dim: usize, power_iters: usize, seed: u64) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let eh = estimate_min_eigenvalue(hessian, dim, power_iters, seed)?;
        Ok(Self::from_estimate(eh, power_iters))
    }
}

/// Regularized Hessian reference metric `G_Y = H(y) + ε I`.
pub struct RegularizedHessian<F> {
    hessian: F,
    reg: HessianRegularization,
}

pub fn hessian_reference<F>(hessian: F, reg: HessianRegularization) -> RegularizedHessian<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync,
{
    RegularizedHessian { hessian, reg }
}

impl<F> RegularizedHessian<F> {
    pub fn regularization(&self) -> HessianRegularization {
        self.reg
    }
}

impl<F> ReferenceMetric for RegularizedHessian<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync,
{
    fn kind(&self) -> ReferenceMetricKind {
        ReferenceMetricKind::HessianRegularized
    }
    fn apply(&self, y: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = (self.hessian)(y, u);
        axpy(self.reg.epsilon, u, &mut out);
        out
    }
}

/// Pullback of `ref_metric` through `map` at `x`, plus `ridge·I`.
///
/// The returned operator evaluates `v ↦ vjp(x, G_Y(f(x)) · jvp(x, v)) + ridge·v`.
pub fn pullback_metric<'a, M, G>(
    map: M,
    ref_metric: G,
    x: &[f64],
    ridge: f64,
) -> Result<MetricOperator<'a>>
where
    M: ReferenceMap + 'a,
    G: ReferenceMetric + 'a,
{
    if map.dim_x() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: map.dim_x(),
            got: x.len(),
        });
    }
    let y = map.eval(x);
    if y.len() != map.dim_y() {
        return Err(Error::DimensionMismatch {
            expected: map.dim_y(),
            got: y.len(),
        });
    }
    let x = x.to_vec();
    let dim = x.len();
    Ok(MetricOperator::new(dim, move |v| {
        let jv = map.jvp(&x, v);
        let gjv = ref_metric.apply(&y, &jv);
        map.vjp(&x, &gjv)
    })
    .with_ridge(ridge))
}

/// Estimates the minimal eigenvalue of a symmetric operator.
///
/// Power iteration first bounds the spectral radius `ρ`; a second power
/// iteration on `H − ρI` (whose spectrum is non-positive) then converges to
/// `λ_min − ρ`, which is shifted back.
pub fn estimate_min_eigenvalue<F>(op: F, dim: usize, power_iters: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if dim == 0 {
        return Err(Error::InvalidArgument("operator dimension is zero".into()));
    }
    let iters = power_iters.max(1);
    let mut rng = rng::seeded(seed);

    let mut v = rng::unit_sphere(&mut rng, dim);
    let mut radius = 0.0;
    for _ in 0..iters {
        let mut hv = op(&v);
        let n = norm(&hv);
        if n == 0.0 || !n.is_finite() {
            break;
        }
        radius = n;
        scale(1.0 / n, &mut hv);
        v = hv;
    }
    if radius == 0.0 {
        return Ok(0.0);
    }

    let shifted = |u: &[f64]| {
        let mut out = op(u);
        axpy(-radius, u, &mut out);
        out
    };
    let mut v = rng::unit_sphere(&mut rng, dim);
    let mut rq = dot(&v, &shifted(&v));
    for _ in 0..iters {
        let mut hv = shifted(&v);
        let n = norm(&hv);
        if n == 0.0 {
            break;
        }
        scale(1.0 / n, &mut hv);
        v = hv;
        rq = dot(&v, &shifted(&v));
    }
    Ok(rq + radius)
}

/// Unbiased stochastic trace estimate from Rademacher probes.
pub fn hutchinson_trace(op: &dyn LinearOperator, probes: usize, seed: u64) -> f64 {
    let mut rng = rng::seeded(seed);
    let n = op.dim();
    let probes = probes.max(1);
    let total: f64 = (0..probes)
        .map(|_| {
            let z = rng::rademacher(&mut rng, n);
            dot(&z, &op.apply(&z))
        })
        .sum();
    total / probes as f64
}

/// Default ridge for possibly singular pullbacks: `1e-10 · tr(G) / n`.
pub fn default_ridge(op: &dyn LinearOperator, seed: u64) -> f64 {
    const RELATIVE_RIDGE: f64 = 1e-10;
    const PROBES: usize = 4;
    let n = op.dim();
    if n == 0 {
        return 0.0;
    }
    (RELATIVE_RIDGE * hutchinson_trace(op, PROBES, seed) / n as f64).max(0.0)
}

/// One outcome of a parameterized probability distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub probability: f64,
    /// `∂ log p / ∂x`
    pub score: Vec<f64>,
}

/// Fisher information metric `Σ_s p_s (∂log p_s)(∂log p_s)ᵀ`, matrix-free.
pub fn fisher_metric<F>(model: F, x: &[f64]) -> Result<MetricOperator<'static>>
where
    F: Fn(&[f64]) -> Result<Vec<Outcome>>,
{
    const NORMALIZATION_TOL: f64 = 1e-10;
    let outcomes = model(x)?;
    let mut total = 0.0;
    for o in &outcomes {
        if o.probability < 0.0 || !o.probability.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "probability {} is not a valid probability",
                o.probability
            )));
        }
        if o.score.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: o.score.len(),
            });
        }
        total += o.probability;
    }
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidArgument(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    let dim = x.len();
    Ok(MetricOperator::new(dim, move |v| {
        let mut out = vec![0.0; v.len()];
        for o in &outcomes {
            if o.probability == 0.0 {
                continue;
            }
            let c = o.probability * dot(&o.score, v);
            axpy(c, &o.score, &mut out);
        }
        out
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// `None` means `10 · dim`.
    pub max_iters: Option<usize>,
}

impl Default for CgSolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_iters: None,
        }
    }
}

impl CgSolverConfig {
    pub fn max_iters_for(&self, dim: usize) -> usize {
        self.max_iters.unwrap_or(10 * dim).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `op · dx = b` by linear conjugate gradients from `dx = 0`.
///
/// Iterates stay in the Krylov space of `b`, so consistent singular systems
/// converge too. Convergence is certified against the true residual
/// `‖op(dx) − b‖`, restarting from it if the recursive residual has drifted.
pub fn cg_solve(op: &dyn LinearOperator, b: &[f64], cfg: &CgSolverConfig) -> Result<CgSolution> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if !crate::linalg::all_finite(b) {
        return Err(Error::NonFinite("cg right-hand side"));
    }
    let threshold = cfg.abs_tol.max(cfg.rel_tol * norm(b));
    let max_iters = cfg.max_iters_for(n);

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= threshold {
        return Ok(CgSolution {
            solution: x,
            iterations: 0,
            residual: rr.sqrt(),
        });
    }
    let mut p = r.clone();

    for k in 1..=max_iters {
        let ap = op.apply(&p);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 || !curvature.is_finite() {
            return Err(Error::CgBreakdown {
                iteration: k,
                curvature,
                last_iterate: x,
            });
        }
        let alpha = rr / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);

        if rr_new.sqrt() <= threshold {
            let mut true_r = op.apply(&x);
            for (ti, bi) in true_r.iter_mut().zip(b) {
                *ti = bi - *ti;
            }
            let true_norm = norm(&true_r);
            if true_norm <= threshold {
                return Ok(CgSolution {
                    solution: x,
                    iterations: k,
                    residual: true_norm,
                });
            }
            r = true_r;
            rr = true_norm * true_norm;
            p = r.clone();
            continue;
        }

        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }

    let mut true_r = op.apply(&x);
    for (ti, bi) in true_r.iter_mut().zip(b) {
        *ti = bi - *ti;
    }
    Err(Error::CgNotConverged {
        iterations: max_iters,
        residual: norm(&true_r),
        last_iterate: x,
    })
}

//! The iterative minimization loop `x ← x + η·d` with pluggable directions.
//!
//! Three direction providers are available: steepest descent, nonlinear
//! conjugate gradients (Polak–Ribière+), and natural gradient descent, where
//! `d = −G⁻¹∇L` is obtained by solving with a matrix-free metric. Every
//! direction is normalized to unit length before a backtracking Armijo search.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy, dot, norm, scaled};
use crate::metric::{cg_solve, CgSolverConfig, LinearOperator, MetricOperator};

/// Flat parameter vector `x`. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !all_finite(&values) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for ParameterVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Named metrics understood by the problems in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricId {
    Identity,
    Density,
    HilbertIdentity,
    HilbertHessian,
    MpsAmplitude,
    RayleighPullback,
    Fisher,
    SpinPullback,
}

impl MetricId {
    pub const ALL: [MetricId; 8] = [
        MetricId::Identity,
        MetricId::Density,
        MetricId::HilbertIdentity,
        MetricId::HilbertHessian,
        MetricId::MpsAmplitude,
        MetricId::RayleighPullback,
        MetricId::Fisher,
        MetricId::SpinPullback,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Identity => "identity",
            MetricId::Density => "density",
            MetricId::HilbertIdentity => "hilbert_identity",
            MetricId::HilbertHessian => "hilbert_hessian",
            MetricId::MpsAmplitude => "mps_amplitude",
            MetricId::RayleighPullback => "rayleigh_pullback",
            MetricId::Fisher => "fisher",
            MetricId::SpinPullback => "spin_pullback",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMetric(s.to_string()))
    }
}

/// How the small stabilizing ridge is chosen for problem metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RidgePolicy {
    /// `factor · tr(G) / n`, with the trace estimated stochastically.
    TraceRelative(f64),
    Fixed(f64),
}

/// Settings shared by all problem-supplied metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSettings {
    pub ridge: RidgePolicy,
    /// Power iterations for the minimal-Hessian-eigenvalue estimate.
    pub power_iters: usize,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self {
            ridge: RidgePolicy::TraceRelative(1e-10),
            power_iters: crate::metric::HessianRegularization::DEFAULT_POWER_ITERS,
        }
    }
}

impl MetricSettings {
    pub(crate) fn apply_ridge<'a>(&self, op: MetricOperator<'a>, seed: u64) -> MetricOperator<'a> {
        match self.ridge {
            RidgePolicy::Fixed(r) => op.with_ridge(r),
            RidgePolicy::TraceRelative(factor) => {
                let n = op.dim().max(1) as f64;
                let trace = crate::metric::hutchinson_trace(&op, 4, seed);
                op.with_ridge(factor * trace / n)
            }
        }
    }
}

/// Builds the metric at each iterate. Created once per run, so expensive
/// one-off work (such as estimating a Hessian shift) happens at run start.
pub trait MetricBuilder: Send + Sync {
    fn metric_at(&self, x: &[f64]) -> Result<MetricOperator<'_>>;

    /// Resolved settings worth echoing in run reports, e.g. `epsilon`.
    fn settings(&self) -> Vec<(String, f64)> {
        Vec::new()
    }
}

/// Builds the flat metric `G = I`.
pub struct IdentityBuilder(pub usize);

impl MetricBuilder for IdentityBuilder {
    fn metric_at(&self, _x: &[f64]) -> Result<MetricOperator<'_>> {
        Ok(MetricOperator::identity(self.0))
    }
}

/// A cost function with gradient and (optionally) metrics.
pub trait Problem: Send + Sync {
    fn dim(&self) -> usize;
    fn cost(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn cost_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.cost(x)?, self.gradient(x)?))
    }

    /// Metrics this problem can build. `identity` is always available.
    fn supported_metrics(&self) -> Vec<MetricId> {
        vec![MetricId::Identity]
    }

    /// Prepares the metric named `id` for a run starting at `x0`.
    fn metric_builder(
        &self,
        id: MetricId,
        x0: &[f64],
        settings: &MetricSettings,
        seed: u64,
    ) -> Result<Box<dyn MetricBuilder + '_>> {
        let _ = (x0, settings, seed);
        match id {
            MetricId::Identity => Ok(Box::new(IdentityBuilder(self.dim()))),
            other => Err(Error::UnknownMetric(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    pub initial_step: f64,
    pub shrink_factor: f64,
    pub armijo_c: f64,
    pub max_backtracks: usize,
    pub normalize_direction: bool,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink_factor: 0.5,
            armijo_c: 1e-4,
            max_backtracks: 40,
            normalize_direction: true,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_step > 0.0
            && self.initial_step.is_finite()
            && self.shrink_factor > 0.0
            && self.shrink_factor < 1.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.max_backtracks > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid line search config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub x_new: Vec<f64>,
    pub cost_new: f64,
    /// The direction actually searched (unit length when normalizing).
    pub direction: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LineSearchError {
    #[error("direction is not a descent direction (slope {slope:e})")]
    NotDescent { slope: f64 },
    #[error("no Armijo step found after {evaluations} trial points")]
    Exhausted { evaluations: usize },
}

/// Backtracking Armijo search along `dir` from `x`.
///
/// Tests `η = initial_step · shrink^k` for `k = 0..=max_backtracks` and
/// returns the first (largest) step with
/// `L(x + η d) ≤ L(x) + c · η · dᵀ∇L(x)`. Trial points where the cost is
/// undefined or non-finite are rejected.
pub fn line_search<P: Problem + ?Sized>(
    problem: &P,
    x: &[f64],
    cost_x: f64,
    grad: &[f64],
    dir: &[f64],
    cfg: &LineSearchConfig,
) -> std::result::Result<LineSearchOutcome, LineSearchError> {
    let d = if cfg.normalize_direction {
        let n = norm(dir);
        if n == 0.0 || !n.is_finite() {
            return Err(LineSearchError::NotDescent { slope: 0.0 });
        }
        scaled(1.0 / n, dir)
    } else {
        dir.to_vec()
    };
    let slope = dot(&d, grad);
    if !(slope < 0.0) {
        return Err(LineSearchError::NotDescent { slope });
    }

    let mut step = cfg.initial_step;
    let mut x_new = vec![0.0; x.len()];
    for k in 0..=cfg.max_backtracks {
        for ((xn, xi), di) in x_new.iter_mut().zip(x).zip(&d) {
            *xn = xi + step * di;
        }
        if let Ok(c) = problem.cost(&x_new) {
            if c.is_finite() && c <= cost_x + cfg.armijo_c * step * slope {
                return Ok(LineSearchOutcome {
                    step,
                    x_new,
                    cost_new: c,
                    direction: d,
                    evaluations: k + 1,
                });
            }
        }
        step *= cfg.shrink_factor;
    }
    Err(LineSearchError::Exhausted {
        evaluations: cfg.max_backtracks + 1,
    })
}

pub fn gradient_descent_direction(grad: &[f64]) -> Vec<f64> {
    grad.iter().map(|g| -g).collect()
}

/// Polak–Ribière+ direction `−g + β·d_prev`, `β = max(0, gᵀ(g − g_prev)/‖g_prev‖²)`.
///
/// Falls back to `−g` on the first iteration, when `β` clamps to zero, or
/// when `‖g_prev‖ = 0`.
pub fn nonlinear_cg_direction(grad: &[f64], prev: Option<(&[f64], &[f64])>) -> Vec<f64> {
    let mut d = gradient_descent_direction(grad);
    let Some((prev_grad, prev_dir)) = prev else {
        return d;
    };
    let denom = dot(prev_grad, prev_grad);
    if denom == 0.0 {
        return d;
    }
    let num: f64 = grad
        .iter()
        .zip(prev_grad)
        .map(|(g, gp)| g * (g - gp))
        .sum();
    let beta = (num / denom).max(0.0);
    if beta > 0.0 {
        axpy(beta, prev_dir, &mut d);
    }
    d
}

/// Natural gradient direction `−dx` where `G·dx = ∇L`, solved by linear CG.
pub fn natural_direction(
    grad: &[f64],
    metric: &dyn LinearOperator,
    cfg: &CgSolverConfig,
) -> Result<Vec<f64>> {
    Ok(natural_direction_detailed(grad, metric, cfg)?.0)
}

fn natural_direction_detailed(
    grad: &[f64],
    metric: &dyn LinearOperator,
    cfg: &CgSolverConfig,
) -> Result<(Vec<f64>, usize)> {
    let sol = cg_solve(metric, grad, cfg)?;
    Ok((gradient_descent_direction(&sol.solution), sol.iterations))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gd,
    NonlinearCg,
    Ngd,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::NonlinearCg => "nonlinear_cg",
            Method::Ngd => "ngd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(Method::Gd),
            "nonlinear_cg" => Ok(Method::NonlinearCg),
            "ngd" => Ok(Method::Ngd),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub cost_tol: f64,
    /// Required for, and only allowed with, [`Method::Ngd`].
    pub metric_id: Option<MetricId>,
    pub seed: u64,
    pub cg: CgSolverConfig,
    pub metric: MetricSettings,
}

impl OptimizerConfig {
    pub fn new(method: Method, max_iterations: usize) -> Self {
        Self {
            method,
            max_iterations,
            grad_tol: 1e-12,
            cost_tol: 0.0,
            metric_id: None,
            seed: 0,
            cg: CgSolverConfig::default(),
            metric: MetricSettings::default(),
        }
    }

    pub fn ngd(metric: MetricId, max_iterations: usize) -> Self {
        Self {
            metric_id: Some(metric),
            ..Self::new(Method::Ngd, max_iterations)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.method, self.metric_id) {
            (Method::Ngd, None) => Err(Error::InvalidArgument("ngd requires a metric".into())),
            (Method::Gd | Method::NonlinearCg, Some(m)) => Err(Error::InvalidArgument(format!(
                "metric `{m}` given for method {}",
                self.method
            ))),
            _ if self.grad_tol < 0.0 || self.cost_tol < 0.0 => {
                Err(Error::InvalidArgument("tolerances must be non-negative".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalReason {
    Converged,
    MaxIters,
    LineSearchFailed,
}

impl TerminalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalReason::Converged => "converged",
            TerminalReason::MaxIters => "max_iters",
            TerminalReason::LineSearchFailed => "line_search_failed",
        }
    }
}

/// One accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step_size: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallbackReason {
    /// The natural direction was not a descent direction.
    NotDescent,
    /// Linear CG stopped early; its last iterate was used.
    TruncatedSolve,
    /// Linear CG failed and no usable iterate existed.
    SolverFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FallbackEvent {
    pub iteration: usize,
    pub reason: FallbackReason,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvaluationCounts {
    pub cost: usize,
    pub gradient: usize,
    pub metric_builds: usize,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub initial_cost: f64,
    pub initial_grad_norm: f64,
    pub records: Vec<IterationRecord>,
    pub terminal_reason: TerminalReason,
    pub fallbacks: Vec<FallbackEvent>,
    pub evaluations: EvaluationCounts,
    pub final_x: Vec<f64>,
    pub metric_settings: Vec<(String, f64)>,
}

impl RunTrace {
    pub fn final_cost(&self) -> f64 {
        self.records.last().map_or(self.initial_cost, |r| r.cost)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error("non-finite cost or gradient at iteration {iteration}")]
    NonFinite {
        iteration: usize,
        trace: Box<RunTrace>,
    },
}

/// Minimizes `problem` from `x0`.
///
/// Stops when `‖∇L‖ ≤ grad_tol`, `|ΔL| ≤ cost_tol`, the iteration budget is
/// spent, or the line search fails. Only accepted steps are recorded.
pub fn optimize<P: Problem + ?Sized>(
    problem: &P,
    x0: &ParameterVector,
    opt: &OptimizerConfig,
    ls: &LineSearchConfig,
) -> std::result::Result<RunTrace, OptimizeError> {
    opt.validate()?;
    ls.validate()?;
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        }
        .into());
    }
    let start = Instant::now();

    let builder = match (opt.method, opt.metric_id) {
        (Method::Ngd, Some(id)) => Some(problem.metric_builder(id, x0, &opt.metric, opt.seed)?),
        _ => None,
    };

    let mut x = x0.as_slice().to_vec();
    let (mut cost, mut grad) = problem.cost_and_gradient(&x)?;
    let mut trace = RunTrace {
        initial_cost: cost,
        initial_grad_norm: norm(&grad),
        records: Vec::new(),
        terminal_reason: TerminalReason::MaxIters,
        fallbacks: Vec::new(),
        evaluations: EvaluationCounts {
            cost: 1,
            gradient: 1,
            ..Default::default()
        },
        final_x: Vec::new(),
        metric_settings: builder.as_ref().map(|b| b.settings()).unwrap_or_default(),
    };
    if !cost.is_finite() || !all_finite(&grad) {
        trace.final_x = x;
        return Err(OptimizeError::NonFinite {
            iteration: 0,
            trace: Box::new(trace),
        });
    }

    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut terminal = TerminalReason::MaxIters;

    for iteration in 1..=opt.max_iterations {
        if norm(&grad) <= opt.grad_tol {
            terminal = TerminalReason::Converged;
            break;
        }

        let dir = match opt.method {
            Method::Gd => gradient_descent_direction(&grad),
            Method::NonlinearCg => {
                let d = nonlinear_cg_direction(
                    &grad,
                    prev.as_ref().map(|(g, d)| (g.as_slice(), d.as_slice())),
                );
                if dot(&d, &grad) < 0.0 {
                    d
                } else {
                    gradient_descent_direction(&grad)
                }
            }
            Method::Ngd => {
                let builder = builder.as_ref().expect("ngd has a metric builder");
                let metric = builder.metric_at(&x)?;
                trace.evaluations.metric_builds += 1;
                ngd_direction(&grad, &metric, &opt.cg, iteration, &mut trace)
            }
        };

        let outcome = match line_search(problem, &x, cost, &grad, &dir, ls) {
            Ok(o) => o,
            Err(LineSearchError::NotDescent { .. }) | Err(LineSearchError::Exhausted { .. }) => {
                trace.evaluations.cost += ls.max_backtracks + 1;
                terminal = TerminalReason::LineSearchFailed;
                break;
            }
        };
        trace.evaluations.cost += outcome.evaluations;

        let new_grad = problem.gradient(&outcome.x_new)?;
        trace.evaluations.gradient += 1;
        let grad_norm = norm(&new_grad);
        trace.records.push(IterationRecord {
            iteration,
            cost: outcome.cost_new,
            grad_norm,
            step_size: outcome.step,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        if !all_finite(&new_grad) {
            trace.final_x = outcome.x_new;
            return Err(OptimizeError::NonFinite {
                iteration,
                trace: Box::new(trace),
            });
        }

        let delta = (cost - outcome.cost_new).abs();
        prev = Some((std::mem::replace(&mut grad, new_grad), dir));
        x = outcome.x_new;
        cost = outcome.cost_new;

        if delta <= opt.cost_tol || grad_norm <= opt.grad_tol {
            terminal = TerminalReason::Converged;
            break;
        }
    }

    trace.terminal_reason = terminal;
    trace.final_x = x;
    Ok(trace)
}

fn ngd_direction(
    grad: &[f64],
    metric: &MetricOperator<'_>,
    cg: &CgSolverConfig,
    iteration: usize,
    trace: &mut RunTrace,
) -> Vec<f64> {
    let mut fallback = |reason| {
        trace.fallbacks.push(FallbackEvent { iteration, reason });
    };
    match natural_direction_detailed(grad, metric, cg) {
        Ok((d, iters)) => {
            trace.evaluations.cg_iterations += iters;
            if dot(&d, grad) < 0.0 {
                d
            } else {
                fallback(FallbackReason::NotDescent);
                gradient_descent_direction(grad)
            }
        }
        Err(Error::CgNotConverged {
            iterations,
            last_iterate,
            ..
        }) => {
            trace.evaluations.cg_iterations += iterations;
            truncated_or_gradient(grad, last_iterate, &mut fallback)
        }
        Err(Error::CgBreakdown {
            iteration: iters,
            last_iterate,
            ..
        }) => {
            trace.evaluations.cg_iterations += iters;
            truncated_or_gradient(grad, last_iterate, &mut fallback)
        }
        Err(_) => {
            fallback(FallbackReason::SolverFailed);
            gradient_descent_direction(grad)
        }
    }
}

fn truncated_or_gradient(
    grad: &[f64],
    last_iterate: Vec<f64>,
    fallback: &mut impl FnMut(FallbackReason),
) -> Vec<f64> {
    let d = gradient_descent_direction(&last_iterate);
    if all_finite(&d) && dot(&d, grad) < 0.0 {
        fallback(FallbackReason::TruncatedSolve);
        d
    } else {
        fallback(FallbackReason::SolverFailed);
        gradient_descent_direction(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    /// `xᵀ diag(a) x / 2`
    struct Quadratic(Vec<f64>);

    impl Problem for Quadratic {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn cost(&self, x: &[f64]) -> Result<f64> {
            Ok(0.5 * x.iter().zip(&self.0).map(|(x, a)| a * x * x).sum::<f64>())
        }
        fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(x.iter().zip(&self.0).map(|(x, a)| a * x).collect())
        }
    }

    struct Quartic;

    impl Problem for Quartic {
        fn dim(&self) -> usize {
            1
        }
        fn cost(&self, x: &[f64]) -> Result<f64> {
            Ok(x[0].powi(4))
        }
        fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![4.0 * x[0].powi(3)])
        }
    }

    #[test]
    fn gd_direction_flips_sign() {
        assert_eq!(gradient_descent_direction(&[0.0, 0.0, 0.0]), vec![0.0; 3]);
        assert_eq!(gradient_descent_direction(&[1.0, -2.0]), vec![-1.0, 2.0]);
    }

    #[test]
    fn ncg_resets() {
        assert_eq!(nonlinear_cg_direction(&[3.0, 4.0], None), vec![-3.0, -4.0]);
        let g = [1.0, 2.0];
        assert_eq!(
            nonlinear_cg_direction(&g, Some((&g, &[5.0, 5.0]))),
            vec![-1.0, -2.0]
        );
        assert_eq!(
            nonlinear_cg_direction(&g, Some((&[0.0, 0.0], &[5.0, 5.0]))),
            vec![-1.0, -2.0]
        );
    }

    #[test]
    fn ncg_terminates_on_2d_quadratic_with_exact_line_search() {
        let a = [1.0, 10.0];
        let mut x = vec![1.0, 1.0];
        let grad = |x: &[f64]| vec![a[0] * x[0], a[1] * x[1]];
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        for _ in 0..2 {
            let g = grad(&x);
            let d = nonlinear_cg_direction(&g, prev.as_ref().map(|(g, d)| (&g[..], &d[..])));
            let dad = a[0] * d[0] * d[0] + a[1] * d[1] * d[1];
            let eta = -dot(&g, &d) / dad;
            axpy(eta, &d, &mut x);
            prev = Some((g, d));
        }
        assert!(norm(&grad(&x)) <= 1e-10, "{:?}", grad(&x));
    }

    #[test]
    fn natural_direction_identity_and_diagonal() {
        let g = [0.3, -1.2, 2.0];
        let d = natural_direction(&g, &MetricOperator::identity(3), &CgSolverConfig::default())
            .unwrap();
        assert_eq!(d, vec![-0.3, 1.2, -2.0]);

        let diag = MetricOperator::new(2, |v| vec![2.0 * v[0], 4.0 * v[1]]);
        let d = natural_direction(&[2.0, 4.0], &diag, &CgSolverConfig::default()).unwrap();
        assert!(max_abs_diff(&d, &[-1.0, -1.0]) < 1e-12);
    }

    #[test]
    fn line_search_hits_exact_minimizer() {
        let p = Quadratic(vec![1.0, 1.0]);
        let x = [1.0, 0.0];
        let g = p.gradient(&x).unwrap();
        let out = line_search(&p, &x, 0.5, &g, &[-1.0, 0.0], &LineSearchConfig::default()).unwrap();
        assert_eq!(out.step, 1.0);
        assert_eq!(out.x_new, vec![0.0, 0.0]);
    }

    #[test]
    fn line_search_rejects_ascent() {
        let p = Quadratic(vec![1.0, 1.0]);
        let x = [1.0, 0.0];
        let g = p.gradient(&x).unwrap();
        let err = line_search(&p, &x, 0.5, &g, &g, &LineSearchConfig::default()).unwrap_err();
        assert!(matches!(err, LineSearchError::NotDescent { .. }));
    }

    #[test]
    fn line_search_armijo_certificate_on_quartic() {
        let cfg = LineSearchConfig::default();
        let x = [1.0];
        let g = Quartic.gradient(&x).unwrap();
        let out = line_search(&Quartic, &x, 1.0, &g, &[-1.0], &cfg).unwrap();
        let lhs = Quartic.cost(&out.x_new).unwrap();
        let rhs = 1.0 + cfg.armijo_c * out.step * dot(&out.direction, &g);
        assert!(lhs <= rhs);
        // η = 1 overshoots to 0 exactly, which satisfies Armijo.
        assert_eq!(out.step, 1.0);
    }

    #[test]
    fn line_search_normalizes() {
        let p = Quadratic(vec![1.0, 4.0]);
        let x = [3.0, -2.0];
        let g = p.gradient(&x).unwrap();
        let out = line_search(&p, &x, p.cost(&x).unwrap(), &g, &[-30.0, 80.0], &Default::default())
            .unwrap();
        assert!((norm(&out.direction) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn line_search_exhaustion() {
        let p = Quadratic(vec![1.0]);
        let cfg = LineSearchConfig {
            max_backtracks: 2,
            initial_step: 100.0,
            ..Default::default()
        };
        let err = line_search(&p, &[1.0], 0.5, &[1.0], &[-1.0], &cfg).unwrap_err();
        assert_eq!(err, LineSearchError::Exhausted { evaluations: 3 });
    }

    #[test]
    fn gd_converges_on_quadratic() {
        let p = Quadratic(vec![1.0, 3.0]);
        let x0 = ParameterVector::new(vec![1.0, -1.0]).unwrap();
        let mut cfg = OptimizerConfig::new(Method::Gd, 5000);
        cfg.grad_tol = 1e-9;
        let trace = optimize(&p, &x0, &cfg, &LineSearchConfig::default()).unwrap();
        assert_eq!(trace.terminal_reason, TerminalReason::Converged);
        assert!(norm(&trace.final_x) < 1e-8);
        for w in trace.records.windows(2) {
            assert!(w[1].cost <= w[0].cost);
            assert!(w[1].iteration > w[0].iteration);
        }
    }

    #[test]
    fn zero_budget() {
        let p = Quadratic(vec![1.0, 3.0]);
        let x0 = ParameterVector::new(vec![1.0, -1.0]).unwrap();
        let trace = optimize(
            &p,
            &x0,
            &OptimizerConfig::new(Method::Gd, 0),
            &LineSearchConfig::default(),
        )
        .unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(trace.terminal_reason, TerminalReason::MaxIters);
    }

    #[test]
    fn identity_ngd_matches_gd() {
        let p = Quadratic(vec![1.0, 7.0, 0.2]);
        let x0 = ParameterVector::new(vec![1.0, -1.0, 2.0]).unwrap();
        let ls = LineSearchConfig::default();
        let gd = optimize(&p, &x0, &OptimizerConfig::new(Method::Gd, 50), &ls).unwrap();
        let ngd = optimize(&p, &x0, &OptimizerConfig::ngd(MetricId::Identity, 50), &ls).unwrap();
        assert_eq!(gd.records.len(), ngd.records.len());
        for (a, b) in gd.records.iter().zip(&ngd.records) {
            assert!((a.cost - b.cost).abs() <= 1e-12);
            assert_eq!(a.step_size, b.step_size);
        }
        assert!(max_abs_diff(&gd.final_x, &ngd.final_x) <= 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut cfg = OptimizerConfig::new(Method::Ngd, 1);
        assert!(cfg.validate().is_err());
        cfg.metric_id = Some(MetricId::Identity);
        assert!(cfg.validate().is_ok());
        cfg.method = Method::Gd;
        assert!(cfg.validate().is_err());
        assert!(LineSearchConfig {
            shrink_factor: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn unknown_metric_is_setup_error() {
        let p = Quadratic(vec![1.0]);
        let x0 = ParameterVector::new(vec![1.0]).unwrap();
        let err = optimize(
            &p,
            &x0,
            &OptimizerConfig::ngd(MetricId::Density, 5),
            &LineSearchConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, OptimizeError::Setup(Error::UnknownMetric(_))));
    }

    #[test]
    fn non_finite_start_aborts() {
        struct Bad;
        impl Problem for Bad {
            fn dim(&self) -> usize {
                1
            }
            fn cost(&self, _: &[f64]) -> Result<f64> {
                Ok(f64::NAN)
            }
            fn gradient(&self, _: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![0.0])
            }
        }
        let x0 = ParameterVector::new(vec![1.0]).unwrap();
        let err = optimize(
            &Bad,
            &x0,
            &OptimizerConfig::new(Method::Gd, 5),
            &LineSearchConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, OptimizeError::NonFinite { iteration: 0, .. }));
    }

    #[test]
    fn parameter_vector_rejects_nan() {
        assert!(ParameterVector::new(vec![1.0, f64::INFINITY]).is_err());
        assert_eq!(MetricId::from_str("hilbert_hessian").unwrap(), MetricId::HilbertHessian);
        assert!(MetricId::from_str("nope").is_err());
    }
}

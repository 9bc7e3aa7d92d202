//! Oracle cross-checks for the configured problem instance.

use std::fmt::Write as _;

use pullback_ngd::linalg::{cosine, norm, sub};
use pullback_ngd::metric::{
    euclidean_reference, hessian_reference, CgSolverConfig, HessianRegularization, ReferenceMap, ReferenceMetric,
};
use pullback_ngd::optim::{gradient_descent_direction, natural_direction, MetricId, MetricSettings, RidgePolicy};
use pullback_ngd::oracles::{
    assemble_dense_metric, finite_difference_gradient, projection_identity_check, DenseMatrix, DENSE_DIM_LIMIT,
};
use pullback_ngd::problems::mps::{AmplitudeMap, DensityMap, HilbertQuartic};
use pullback_ngd::problems::rayleigh::NormalizedVectorMap;
use pullback_ngd::problems::spin::SpinNormalizationMap;

use crate::config::BenchmarkConfig;
use crate::problem::BuiltProblem;
use crate::BenchError;

/// Largest dimension for which finite-difference gradients are attempted.
pub const FD_DIM_LIMIT: usize = 5000;
pub const FD_STEP: f64 = 1e-6;
pub const GRADIENT_TOL: f64 = 1e-6;
/// Dense against matrix-free metric: max abs difference, scaled by the
/// largest dense entry when that exceeds one.
pub const METRIC_TOL: f64 = 1e-10;
pub const PROJECTION_TOL_RAYLEIGH: f64 = 1e-8;
pub const PROJECTION_TOL: f64 = 1e-6;
pub const FISHER_COSINE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub measured: Option<f64>,
    pub tolerance: Option<f64>,
    pub note: String,
}

impl CheckResult {
    fn measured(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        let pass = measured <= tolerance;
        Self {
            name: name.into(),
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            measured: Some(measured),
            tolerance: Some(tolerance),
            note: String::new(),
        }
    }

    fn skipped(name: impl Into<String>, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Skipped,
            measured: None,
            tolerance: None,
            note: note.into(),
        }
    }

    fn failed(name: impl Into<String>, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Fail,
            measured: None,
            tolerance: None,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub problem: String,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    /// True when nothing failed; skipped checks do not count against it.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("verify: {}\n", self.problem);
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let _ = write!(out, "{}  {:<width$}", c.status.as_str(), c.name);
            if let (Some(m), Some(t)) = (c.measured, c.tolerance) {
                let _ = write!(out, "  measured {m:.3e}  tolerance {t:.1e}");
            }
            if !c.note.is_empty() {
                let _ = write!(out, "  {}", c.note);
            }
            out.push('\n');
        }
        let failed = self.checks.iter().filter(|c| c.status == CheckStatus::Fail).count();
        let skipped = self.checks.iter().filter(|c| c.status == CheckStatus::Skipped).count();
        let _ = writeln!(
            out,
            "{} checks, {} failed, {} skipped",
            self.checks.len(),
            failed,
            skipped
        );
        out
    }
}

fn too_large(dim_x: usize, dim_y: usize) -> Option<String> {
    (dim_x > DENSE_DIM_LIMIT || dim_y > DENSE_DIM_LIMIT).then(|| {
        format!("dimensions {dim_x}×{dim_y} exceed the dense limit {DENSE_DIM_LIMIT}")
    })
}

fn regularization_of(settings: &[(String, f64)]) -> Option<HessianRegularization> {
    let get = |k: &str| settings.iter().find(|(n, _)| n == k).map(|(_, v)| *v);
    let eh = get("epsilon_h_estimate")?;
    let reg = HessianRegularization::from_estimate(eh, get("power_iters").unwrap_or(0.0) as usize);
    (reg.epsilon == get("epsilon")?).then_some(reg)
}

/// Compares the problem's own metric operator at `x` with literal dense assembly.
fn metric_check<M, G>(
    name: String,
    built: &BuiltProblem,
    id: MetricId,
    x: &[f64],
    map: &M,
    reference: impl FnOnce(Option<HessianRegularization>) -> Option<G>,
    seed: u64,
) -> CheckResult
where
    M: ReferenceMap + ?Sized,
    G: ReferenceMetric,
{
    if let Some(note) = too_large(map.dim_x(), map.dim_y()) {
        return CheckResult::skipped(name, note);
    }
    let settings = MetricSettings {
        ridge: RidgePolicy::Fixed(0.0),
        ..MetricSettings::default()
    };
    let result = (|| -> Result<CheckResult, BenchError> {
        let builder = built.problem().metric_builder(id, x, &settings, seed)?;
        let Some(reference) = reference(regularization_of(&builder.settings())) else {
            return Ok(CheckResult::failed(name.clone(), "metric builder reported no usable shift"));
        };
        let op = builder.metric_at(x)?;
        let from_op = DenseMatrix::from_operator(&op)?;
        let dense = assemble_dense_metric(map, &reference, x)?;
        let scale = dense.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        Ok(CheckResult::measured(name.clone(), from_op.max_abs_diff(&dense), METRIC_TOL * scale))
    })();
    result.unwrap_or_else(|e| CheckResult::failed(name, e.to_string()))
}

fn projection_check<M, G>(
    name: &str,
    map: &M,
    reference: &G,
    x: &[f64],
    grad: &[f64],
    ref_grad: &[f64],
    tol: f64,
) -> CheckResult
where
    M: ReferenceMap + ?Sized,
    G: ReferenceMetric + ?Sized,
{
    if let Some(note) = too_large(map.dim_x(), map.dim_y()) {
        return CheckResult::skipped(name, note);
    }
    match projection_identity_check(map, reference, x, grad, ref_grad) {
        Ok(r) if r.chain_rule_residual > 1e-8 * norm(grad).max(1.0) => CheckResult::failed(
            name,
            format!("reference gradient inconsistent: chain-rule residual {:.3e}", r.chain_rule_residual),
        ),
        Ok(r) => CheckResult::measured(name, r.defect, tol),
        Err(e) => CheckResult::failed(name, e.to_string()),
    }
}

/// Runs finite-difference, dense-metric and projection checks at seeded points.
pub fn verify(cfg: &BenchmarkConfig) -> Result<VerifyReport, BenchError> {
    let built = BuiltProblem::build(cfg)?;
    let problem = built.problem();
    let seed = cfg.method_seed(0);
    let x = built.initial_point(cfg.init_seed());
    let mut checks = Vec::new();

    for k in 0..3u64 {
        let name = format!("gradient_fd/{k}");
        if problem.dim() > FD_DIM_LIMIT {
            checks.push(CheckResult::skipped(name, format!("dimension exceeds {FD_DIM_LIMIT}")));
            continue;
        }
        let xk = built.initial_point(cfg.init_seed().wrapping_add(k));
        let g = problem.gradient(&xk)?;
        let fd = finite_difference_gradient(|p| problem.cost(p), &xk, FD_STEP)?;
        checks.push(CheckResult::measured(name, norm(&sub(&g, &fd)) / norm(&fd).max(1e-12), GRADIENT_TOL));
    }

    let grad = problem.gradient(&x)?;
    match &built {
        BuiltProblem::Rayleigh(p) => {
            let inst = &p.instance;
            let map = NormalizedVectorMap { n: inst.n() };
            let apply = |_y: &[f64], u: &[f64]| inst.apply(u);
            checks.push(metric_check(
                "metric_dense/rayleigh_pullback".into(),
                &built,
                MetricId::RayleighPullback,
                &x,
                &map,
                |reg| reg.map(|r| hessian_reference(apply, r)),
                seed,
            ));
            let builder = problem.metric_builder(MetricId::RayleighPullback, &x, &MetricSettings::default(), seed)?;
            match regularization_of(&builder.settings()) {
                Some(reg) => checks.push(projection_check(
                    "projection/rayleigh_pullback",
                    &map,
                    &hessian_reference(apply, reg),
                    &x,
                    &grad,
                    &p.reference_gradient(&map.eval(&x)),
                    PROJECTION_TOL_RAYLEIGH,
                )),
                None => checks.push(CheckResult::failed("projection/rayleigh_pullback", "no shift reported")),
            }
            let fisher = problem.metric_builder(
                MetricId::Fisher,
                &x,
                &MetricSettings {
                    ridge: RidgePolicy::Fixed(0.0),
                    ..MetricSettings::default()
                },
                seed,
            )?;
            let mut worst: f64 = 0.0;
            for k in 0..10u64 {
                let xk = built.initial_point(cfg.init_seed().wrapping_add(10 + k));
                let g = problem.gradient(&xk)?;
                let d = natural_direction(&g, &fisher.metric_at(&xk)?, &CgSolverConfig::default())?;
                worst = worst.max(1.0 - cosine(&d, &gradient_descent_direction(&g)));
            }
            checks.push(CheckResult::measured("fisher_direction_cosine", worst, FISHER_COSINE_TOL));
        }
        BuiltProblem::Spin(p) => {
            let g = &p.geometry;
            let map = SpinNormalizationMap { sites: g.sites() };
            let apply = |_y: &[f64], u: &[f64]| g.scaled_adjacency(u);
            checks.push(metric_check(
                "metric_dense/spin_pullback".into(),
                &built,
                MetricId::SpinPullback,
                &x,
                &map,
                |reg| reg.map(|r| hessian_reference(apply, r)),
                seed,
            ));
            let builder = problem.metric_builder(MetricId::SpinPullback, &x, &MetricSettings::default(), seed)?;
            match regularization_of(&builder.settings()) {
                Some(reg) => checks.push(projection_check(
                    "projection/spin_pullback",
                    &map,
                    &hessian_reference(apply, reg),
                    &x,
                    &grad,
                    &p.reference_gradient(&map.eval(&x)),
                    PROJECTION_TOL,
                )),
                None => checks.push(CheckResult::failed("projection/spin_pullback", "no shift reported")),
            }
        }
        BuiltProblem::Mps(p) => {
            let (length, bond_dim) = (p.length(), p.bond_dim());
            let density = DensityMap { length, bond_dim };
            let normalized = AmplitudeMap {
                length,
                bond_dim,
                normalized: true,
            };
            let raw = AmplitudeMap {
                normalized: false,
                ..normalized
            };
            let supported = problem.supported_metrics();
            checks.push(metric_check(
                "metric_dense/density".into(),
                &built,
                MetricId::Density,
                &x,
                &density,
                |_| Some(euclidean_reference()),
                seed,
            ));
            checks.push(metric_check(
                "metric_dense/mps_amplitude".into(),
                &built,
                MetricId::MpsAmplitude,
                &x,
                &raw,
                |_| Some(euclidean_reference()),
                seed,
            ));
            let hilbert = supported.contains(&MetricId::HilbertIdentity);
            let quartic = if hilbert {
                Some(HilbertQuartic::new(length, p.data().targets.matrices().to_vec())?)
            } else {
                None
            };
            match &quartic {
                Some(q) => {
                    checks.push(metric_check(
                        "metric_dense/hilbert_identity".into(),
                        &built,
                        MetricId::HilbertIdentity,
                        &x,
                        &normalized,
                        |_| Some(euclidean_reference()),
                        seed,
                    ));
                    checks.push(metric_check(
                        "metric_dense/hilbert_hessian".into(),
                        &built,
                        MetricId::HilbertHessian,
                        &x,
                        &normalized,
                        |reg| reg.map(|r| hessian_reference(|y: &[f64], u: &[f64]| q.hessian_apply(y, u), r)),
                        seed,
                    ));
                }
                None => {
                    for name in ["metric_dense/hilbert_identity", "metric_dense/hilbert_hessian"] {
                        checks.push(CheckResult::skipped(name, "chain longer than the dense Hilbert-space guard"));
                    }
                }
            }
            checks.push(projection_check(
                "projection/density",
                &density,
                &euclidean_reference(),
                &x,
                &grad,
                &p.reference_gradient(&density.eval(&x)),
                PROJECTION_TOL,
            ));
            match &quartic {
                Some(q) if too_large(normalized.dim_x(), normalized.dim_y()).is_none() => {
                    let y = normalized.eval(&x);
                    checks.push(projection_check(
                        "projection/hilbert_identity",
                        &normalized,
                        &euclidean_reference(),
                        &x,
                        &grad,
                        &q.gradient(&y),
                        PROJECTION_TOL,
                    ));
                }
                _ => checks.push(CheckResult::skipped(
                    "projection/hilbert_identity",
                    "Hilbert space too large for dense assembly",
                )),
            }
        }
    }

    Ok(VerifyReport {
        problem: built.describe(),
        checks,
    })
}

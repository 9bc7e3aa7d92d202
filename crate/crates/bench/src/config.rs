//! TOML benchmark configuration and its resolution into runnable settings.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use pullback_ngd::metric::{CgSolverConfig, HessianRegularization};
use pullback_ngd::optim::{LineSearchConfig, Method, MetricId, MetricSettings, OptimizerConfig, RidgePolicy};
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Master seed. Instance data uses `seed`, the start point `seed + 1`,
    /// and method `i` uses `seed + 100 + i`.
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub optimizer: OptimizerDefaults,
    #[serde(default)]
    pub line_search: LineSearchSettings,
    #[serde(default)]
    pub methods: Vec<MethodEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Either a seeded Gaussian matrix of size `n` or a matrix file.
    Rayleigh {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix_path: Option<PathBuf>,
    },
    Spin {
        width: usize,
        height: usize,
        #[serde(default = "yes")]
        periodic: bool,
    },
    MpsLsm {
        length: usize,
        bond_dim: usize,
        #[serde(default = "default_noise")]
        noise: f64,
        /// Targets from a file instead of generating them from `seed`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_path: Option<PathBuf>,
    },
}

fn yes() -> bool {
    true
}

fn default_noise() -> f64 {
    0.1
}

impl ProblemConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemConfig::Rayleigh { .. } => "rayleigh",
            ProblemConfig::Spin { .. } => "spin",
            ProblemConfig::MpsLsm { .. } => "mps_lsm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RidgeSetting {
    /// `factor · tr(G) / n`
    TraceRelative(f64),
    Fixed(f64),
}

impl From<RidgeSetting> for RidgePolicy {
    fn from(r: RidgeSetting) -> Self {
        match r {
            RidgeSetting::TraceRelative(f) => RidgePolicy::TraceRelative(f),
            RidgeSetting::Fixed(v) => RidgePolicy::Fixed(v),
        }
    }
}

/// Settings shared by every method unless overridden per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerDefaults {
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub cost_tol: f64,
    pub cg_rel_tol: f64,
    pub cg_abs_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_max_iters: Option<usize>,
    pub power_iters: usize,
    pub ridge: RidgeSetting,
}

impl Default for OptimizerDefaults {
    fn default() -> Self {
        let opt = OptimizerConfig::new(Method::Gd, 1000);
        let cg = CgSolverConfig::default();
        Self {
            max_iterations: opt.max_iterations,
            grad_tol: opt.grad_tol,
            cost_tol: opt.cost_tol,
            cg_rel_tol: cg.rel_tol,
            cg_abs_tol: cg.abs_tol,
            cg_max_iters: cg.max_iters,
            power_iters: HessianRegularization::DEFAULT_POWER_ITERS,
            ridge: RidgeSetting::TraceRelative(1e-10),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearchSettings {
    pub initial_step: f64,
    pub shrink_factor: f64,
    pub armijo_c: f64,
    pub max_backtracks: usize,
    pub normalize_direction: bool,
}

impl Default for LineSearchSettings {
    fn default() -> Self {
        LineSearchConfig::default().into()
    }
}

impl From<LineSearchConfig> for LineSearchSettings {
    fn from(c: LineSearchConfig) -> Self {
        Self {
            initial_step: c.initial_step,
            shrink_factor: c.shrink_factor,
            armijo_c: c.armijo_c,
            max_backtracks: c.max_backtracks,
            normalize_direction: c.normalize_direction,
        }
    }
}

impl From<LineSearchSettings> for LineSearchConfig {
    fn from(s: LineSearchSettings) -> Self {
        Self {
            initial_step: s.initial_step,
            shrink_factor: s.shrink_factor,
            armijo_c: s.armijo_c,
            max_backtracks: s.max_backtracks,
            normalize_direction: s.normalize_direction,
        }
    }
}

/// One optimizer run. Unset fields fall back to the config-wide defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    /// Output file stem; defaults to `method` or `method_metric`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cg_rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cg_max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<RidgeSetting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_search: Option<LineSearchSettings>,
}

/// A method entry with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedMethod {
    pub label: String,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    pub seed: u64,
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub cost_tol: f64,
    pub cg_rel_tol: f64,
    pub cg_abs_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_max_iters: Option<usize>,
    pub power_iters: usize,
    pub ridge: RidgeSetting,
    pub line_search: LineSearchSettings,
}

impl ResolvedMethod {
    pub fn optimizer_config(&self) -> OptimizerConfig {
        let method: Method = self.method.parse().expect("validated during resolution");
        let mut opt = OptimizerConfig::new(method, self.max_iterations);
        opt.metric_id = self.metric.as_deref().map(|m| m.parse().expect("validated during resolution"));
        opt.grad_tol = self.grad_tol;
        opt.cost_tol = self.cost_tol;
        opt.seed = self.seed;
        opt.cg = CgSolverConfig {
            rel_tol: self.cg_rel_tol,
            abs_tol: self.cg_abs_tol,
            max_iters: self.cg_max_iters,
        };
        opt.metric = MetricSettings {
            ridge: self.ridge.into(),
            power_iters: self.power_iters,
        };
        opt
    }

    pub fn line_search_config(&self) -> LineSearchConfig {
        self.line_search.into()
    }
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn instance_seed(&self) -> u64 {
        self.seed
    }

    pub fn init_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn method_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(100 + index as u64)
    }

    /// Fills defaults and checks names, pairings, tolerances and labels.
    /// `supported` lists the metrics the configured problem can build.
    pub fn resolve_methods(&self, supported: &[MetricId]) -> Result<Vec<ResolvedMethod>, BenchError> {
        if self.methods.is_empty() {
            return Err(BenchError::Config("the methods list is empty".into()));
        }
        let d = &self.optimizer;
        let mut labels = BTreeSet::new();
        let mut out = Vec::with_capacity(self.methods.len());
        for (i, m) in self.methods.iter().enumerate() {
            let method: Method = m.method.parse().map_err(|e| BenchError::Config(format!("methods[{i}]: {e}")))?;
            let metric = match (method, m.metric.as_deref()) {
                (Method::Ngd, None) => {
                    return Err(BenchError::Config(format!("methods[{i}]: ngd needs a metric")));
                }
                (Method::Ngd, Some(name)) => {
                    let id: MetricId = name.parse().map_err(|e| BenchError::Config(format!("methods[{i}]: {e}")))?;
                    if !supported.contains(&id) {
                        return Err(BenchError::Config(format!(
                            "methods[{i}]: metric `{id}` is not available for the {} problem",
                            self.problem.kind()
                        )));
                    }
                    Some(id.to_string())
                }
                (_, Some(name)) => {
                    return Err(BenchError::Config(format!(
                        "methods[{i}]: metric `{name}` given for method {method}"
                    )));
                }
                (_, None) => None,
            };
            let label = m.label.clone().unwrap_or_else(|| match &metric {
                Some(id) => format!("{method}_{id}"),
                None => method.to_string(),
            });
            if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(BenchError::Config(format!("methods[{i}]: label `{label}` is not a plain file stem")));
            }
            if !labels.insert(label.clone()) {
                return Err(BenchError::Config(format!("duplicate method label `{label}`")));
            }
            let resolved = ResolvedMethod {
                label,
                method: method.to_string(),
                metric,
                seed: self.method_seed(i),
                max_iterations: m.max_iterations.unwrap_or(d.max_iterations),
                grad_tol: m.grad_tol.unwrap_or(d.grad_tol),
                cost_tol: m.cost_tol.unwrap_or(d.cost_tol),
                cg_rel_tol: m.cg_rel_tol.unwrap_or(d.cg_rel_tol),
                cg_abs_tol: d.cg_abs_tol,
                cg_max_iters: m.cg_max_iters.or(d.cg_max_iters),
                power_iters: m.power_iters.unwrap_or(d.power_iters),
                ridge: m.ridge.unwrap_or(d.ridge),
                line_search: m.line_search.unwrap_or(self.line_search),
            };
            resolved
                .optimizer_config()
                .validate()
                .and_then(|_| resolved.line_search_config().validate())
                .map_err(|e| BenchError::Config(format!("methods[{i}]: {e}")))?;
            let ridge_ok = match resolved.ridge {
                RidgeSetting::TraceRelative(v) | RidgeSetting::Fixed(v) => v >= 0.0 && v.is_finite(),
            };
            if !ridge_ok || resolved.cg_rel_tol.is_nan() || resolved.cg_rel_tol < 0.0 || resolved.power_iters == 0 {
                return Err(BenchError::Config(format!(
                    "methods[{i}]: ridge, CG tolerance and power iterations must be non-negative (power iterations positive)"
                )));
            }
            out.push(resolved);
        }
        Ok(out)
    }
}

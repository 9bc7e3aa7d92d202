//! Runs every configured method and writes traces and summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pullback_ngd::optim::{optimize, OptimizeError, ParameterVector, RunTrace};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BenchmarkConfig, ProblemConfig, ResolvedMethod};
use crate::problem::{BuiltProblem, KnownMinimum};
use crate::BenchError;

pub const CSV_HEADER: &str = "iteration,cost,relative_error,grad_norm,step_size,elapsed_seconds";

/// Relative-error levels reported in the summary.
pub const THRESHOLDS: [f64; 3] = [1e-3, 1e-6, 1e-10];

/// `(L − L_min)/|L_min|`, floored at zero so rounding below the minimum
/// reads as exact convergence.
pub fn relative_error(cost: f64, l_min: f64) -> f64 {
    let gap = (cost - l_min).max(0.0);
    if l_min == 0.0 {
        gap
    } else {
        gap / l_min.abs()
    }
}

/// The trace as CSV, including an iteration-0 row for the start point.
pub fn trace_csv(trace: &RunTrace, l_min: Option<f64>) -> String {
    let rel = |c: f64| l_min.map(|m| format!("{:e}", relative_error(c, m))).unwrap_or_default();
    let mut out = String::with_capacity(64 * (trace.records.len() + 2));
    out.push_str(CSV_HEADER);
    out.push('\n');
    let _ = writeln!(
        out,
        "0,{:e},{},{:e},0e0,{:.6}",
        trace.initial_cost,
        rel(trace.initial_cost),
        trace.initial_grad_norm,
        0.0
    );
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{:e},{},{:e},{:e},{:.6}",
            r.iteration,
            r.cost,
            rel(r.cost),
            r.grad_norm,
            r.step_size,
            r.elapsed_seconds
        );
    }
    out
}

/// First accepted iteration whose relative error is at or below `threshold`.
pub fn iterations_to(trace: &RunTrace, l_min: f64, threshold: f64) -> Option<usize> {
    if relative_error(trace.initial_cost, l_min) <= threshold {
        return Some(0);
    }
    trace
        .records
        .iter()
        .find(|r| relative_error(r.cost, l_min) <= threshold)
        .map(|r| r.iteration)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluations {
    pub cost: usize,
    pub gradient: usize,
    pub metric_builds: usize,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub label: String,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    pub trace_file: PathBuf,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub final_relative_error: Option<f64>,
    pub final_grad_norm: f64,
    pub iterations: usize,
    /// Keyed by threshold, e.g. `"1e-6"`; `None` when never reached or the minimum is unknown.
    pub iterations_to: BTreeMap<String, Option<usize>>,
    pub terminal_reason: String,
    pub fallbacks: usize,
    pub evaluations: Evaluations,
    pub metric_settings: BTreeMap<String, f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub problem: String,
    pub dimension: usize,
    pub l_min: Option<f64>,
    pub l_min_source: Option<String>,
    pub methods: Vec<MethodSummary>,
}

impl BenchmarkSummary {
    pub fn method(&self, label: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.label == label)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("problem: {} (dimension {})\n", self.problem, self.dimension);
        match (self.l_min, &self.l_min_source) {
            (Some(v), Some(src)) => {
                let _ = writeln!(out, "minimum: {v:.15e} ({src})");
            }
            _ => out.push_str("minimum: unknown\n"),
        }
        out.push('\n');
        let headers = [
            "label", "final_cost", "rel_error", "iters", "to_1e-3", "to_1e-6", "to_1e-10", "cost_evals",
            "grad_evals", "metric_builds", "cg_iters", "fallbacks", "terminal", "wall_s",
        ];
        let mut rows = vec![headers.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        let opt = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
        for m in &self.methods {
            let mut row = vec![
                m.label.clone(),
                format!("{:.10e}", m.final_cost),
                m.final_relative_error.map_or("-".to_string(), |v| format!("{v:.3e}")),
                m.iterations.to_string(),
            ];
            row.extend(THRESHOLDS.iter().map(|&t| opt(m.iterations_to.get(&threshold_key(t)).copied().flatten())));
            row.extend([
                m.evaluations.cost.to_string(),
                m.evaluations.gradient.to_string(),
                m.evaluations.metric_builds.to_string(),
                m.evaluations.cg_iterations.to_string(),
                m.fallbacks.to_string(),
                m.terminal_reason.clone(),
                format!("{:.2}", m.wall_seconds),
            ]);
            rows.push(row);
        }
        let widths: Vec<usize> = (0..headers.len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        for row in rows {
            let line: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn threshold_key(t: f64) -> String {
    format!("{t:e}")
}

fn write(path: &Path, contents: &str) -> Result<(), BenchError> {
    std::fs::write(path, contents).map_err(|e| BenchError::io(path, e))
}

#[derive(Serialize)]
struct ResolvedRun<'a> {
    #[serde(flatten)]
    method: &'a ResolvedMethod,
    metric_settings: &'a BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    seed: u64,
    instance_seed: u64,
    init_seed: u64,
    output_dir: &'a Path,
    problem: &'a ProblemConfig,
    methods: Vec<ResolvedRun<'a>>,
}

/// Runs all methods (in parallel) and writes, into `output_dir`, one CSV per
/// method plus `summary.txt`, `summary.json` and `resolved_config.toml`.
/// Generated MPS targets are saved as `targets.txt`.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkSummary, BenchError> {
    let built = BuiltProblem::build(cfg)?;
    let problem = built.problem();
    let methods = cfg.resolve_methods(&problem.supported_metrics())?;
    let minimum: Option<KnownMinimum> = built.known_minimum()?;
    let l_min = minimum.map(|m| m.value);
    let x0 = ParameterVector::new(built.initial_point(cfg.init_seed()))?;

    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| BenchError::io(&cfg.output_dir, e))?;
    if let BuiltProblem::Mps(p) = &built {
        write(&cfg.output_dir.join("targets.txt"), &p.data().to_text())?;
    }

    let results: Vec<Result<MethodSummary, BenchError>> = methods
        .par_iter()
        .map(|m| {
            let start = Instant::now();
            let (trace, terminal) = match optimize(problem, &x0, &m.optimizer_config(), &m.line_search_config()) {
                Ok(t) => {
                    let reason = t.terminal_reason.as_str().to_string();
                    (t, reason)
                }
                Err(OptimizeError::NonFinite { trace, .. }) => (*trace, "non_finite".to_string()),
                Err(OptimizeError::Setup(e)) => {
                    return Err(BenchError::Config(format!("method `{}`: {e}", m.label)));
                }
            };
            let wall_seconds = start.elapsed().as_secs_f64();
            let trace_file = cfg.output_dir.join(format!("{}.csv", m.label));
            write(&trace_file, &trace_csv(&trace, l_min))?;
            let final_cost = trace.final_cost();
            Ok(MethodSummary {
                label: m.label.clone(),
                method: m.method.clone(),
                metric: m.metric.clone(),
                trace_file,
                initial_cost: trace.initial_cost,
                final_cost,
                final_relative_error: l_min.map(|v| relative_error(final_cost, v)),
                final_grad_norm: trace.records.last().map_or(trace.initial_grad_norm, |r| r.grad_norm),
                iterations: trace.records.len(),
                iterations_to: THRESHOLDS
                    .iter()
                    .map(|&t| (threshold_key(t), l_min.and_then(|v| iterations_to(&trace, v, t))))
                    .collect(),
                terminal_reason: terminal,
                fallbacks: trace.fallbacks.len(),
                evaluations: Evaluations {
                    cost: trace.evaluations.cost,
                    gradient: trace.evaluations.gradient,
                    metric_builds: trace.evaluations.metric_builds,
                    cg_iterations: trace.evaluations.cg_iterations,
                },
                metric_settings: trace.metric_settings.iter().cloned().collect(),
                wall_seconds,
            })
        })
        .collect();
    let summaries = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let summary = BenchmarkSummary {
        problem: built.describe(),
        dimension: problem.dim(),
        l_min,
        l_min_source: minimum.map(|m| m.source.to_string()),
        methods: summaries,
    };

    let resolved = ResolvedConfig {
        seed: cfg.seed,
        instance_seed: cfg.instance_seed(),
        init_seed: cfg.init_seed(),
        output_dir: &cfg.output_dir,
        problem: &cfg.problem,
        methods: methods
            .iter()
            .zip(&summary.methods)
            .map(|(method, s)| ResolvedRun {
                method,
                metric_settings: &s.metric_settings,
            })
            .collect(),
    };
    let resolved_text = toml::to_string(&resolved).map_err(|e| BenchError::Serialize(e.to_string()))?;
    write(&cfg.output_dir.join("resolved_config.toml"), &resolved_text)?;
    write(&cfg.output_dir.join("summary.txt"), &summary.to_text())?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| BenchError::Serialize(e.to_string()))?;
    write(&cfg.output_dir.join("summary.json"), &json)?;
    Ok(summary)
}

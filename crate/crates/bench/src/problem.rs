//! Builds the configured problem instance.

use pullback_ngd::optim::Problem;
use pullback_ngd::oracles::{dense_symmetric_eigensolve, DenseMatrix};
use pullback_ngd::problems::mps::{generate_target_data, MpsProblem, TargetData};
use pullback_ngd::problems::rayleigh::{RayleighInstance, RayleighProblem};
use pullback_ngd::problems::spin::{LatticeGeometry, SpinProblem};

use crate::config::{BenchmarkConfig, ProblemConfig};
use crate::BenchError;

/// Largest Rayleigh matrix whose minimum is computed densely for error reporting.
pub const DENSE_MINIMUM_LIMIT: usize = 2000;

pub enum BuiltProblem {
    Rayleigh(RayleighProblem),
    Spin(SpinProblem),
    Mps(MpsProblem),
}

/// The exact minimum of the cost, when it is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownMinimum {
    pub value: f64,
    pub source: &'static str,
}

impl BuiltProblem {
    pub fn build(cfg: &BenchmarkConfig) -> Result<Self, BenchError> {
        match &cfg.problem {
            ProblemConfig::Rayleigh { n, matrix_path } => {
                let inst = match (n, matrix_path) {
                    (Some(n), None) => RayleighInstance::random(*n, cfg.instance_seed())?,
                    (None, Some(path)) => {
                        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
                        RayleighInstance::parse(&text)?
                    }
                    (Some(n), Some(path)) => {
                        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
                        let inst = RayleighInstance::parse(&text)?;
                        if inst.n() != *n {
                            return Err(BenchError::Config(format!(
                                "n = {n} but {} holds a {}×{} matrix",
                                path.display(),
                                inst.n(),
                                inst.n()
                            )));
                        }
                        inst
                    }
                    (None, None) => {
                        return Err(BenchError::Config("rayleigh problem needs `n` or `matrix_path`".into()));
                    }
                };
                Ok(Self::Rayleigh(RayleighProblem::new(inst)))
            }
            ProblemConfig::Spin {
                width,
                height,
                periodic,
            } => Ok(Self::Spin(SpinProblem::new(LatticeGeometry::new(*width, *height, *periodic)?))),
            ProblemConfig::MpsLsm {
                length,
                bond_dim,
                noise,
                data_path,
            } => {
                let data = match data_path {
                    Some(path) => {
                        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
                        let data = TargetData::parse(&text)?;
                        if data.length() != *length {
                            return Err(BenchError::Config(format!(
                                "length = {length} but {} describes {} sites",
                                path.display(),
                                data.length()
                            )));
                        }
                        data
                    }
                    None => generate_target_data(*length, *noise, cfg.instance_seed())?,
                };
                Ok(Self::Mps(MpsProblem::new(*bond_dim, data)?))
            }
        }
    }

    pub fn problem(&self) -> &dyn Problem {
        match self {
            Self::Rayleigh(p) => p,
            Self::Spin(p) => p,
            Self::Mps(p) => p,
        }
    }

    pub fn initial_point(&self, seed: u64) -> Vec<f64> {
        match self {
            Self::Rayleigh(p) => p.initial_point(seed),
            Self::Spin(p) => p.initial_point(seed),
            Self::Mps(p) => p.initial_point(seed),
        }
    }

    /// Dense eigensolve for Rayleigh, the Néel value for periodic bipartite lattices.
    pub fn known_minimum(&self) -> Result<Option<KnownMinimum>, BenchError> {
        match self {
            Self::Rayleigh(p) if p.instance.n() <= DENSE_MINIMUM_LIMIT => {
                let n = p.instance.n();
                let m = DenseMatrix::from_row_major(n, n, p.instance.matrix().to_vec())?;
                Ok(Some(KnownMinimum {
                    value: dense_symmetric_eigensolve(&m)?.values[0],
                    source: "dense eigensolve",
                }))
            }
            Self::Spin(p) if p.geometry.periodic() && p.geometry.is_bipartite() => Ok(Some(KnownMinimum {
                value: -2.0,
                source: "Néel state",
            })),
            _ => Ok(None),
        }
    }

    /// Short human description, e.g. `spin 32×32 periodic`.
    pub fn describe(&self) -> String {
        match self {
            Self::Rayleigh(p) => format!("rayleigh n={}", p.instance.n()),
            Self::Spin(p) => format!(
                "spin {}×{} {}",
                p.geometry.width(),
                p.geometry.height(),
                if p.geometry.periodic() { "periodic" } else { "open" }
            ),
            Self::Mps(p) => format!(
                "mps_lsm L={} D={} noise={}",
                p.length(),
                p.bond_dim(),
                p.data().noise_amplitude
            ),
        }
    }
}

//! Benchmark harness: runs configured optimizers on the three model
//! problems, writes convergence traces, and cross-checks against oracles.

pub mod config;
pub mod problem;
pub mod run;
pub mod verify;

use std::path::{Path, PathBuf};

pub use config::BenchmarkConfig;
pub use run::{run_benchmark, BenchmarkSummary, CSV_HEADER};
pub use verify::{verify, VerifyReport};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/benchmarks.md")]
mod book_benchmarks {}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("serialization failed: {0}")]
    Serialize(String),
    #[error(transparent)]
    Library(#[from] pullback_ngd::Error),
}

impl BenchError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

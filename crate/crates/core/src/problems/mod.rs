//! Benchmark problems.

pub mod rayleigh;
pub mod spin;
pub mod mps;

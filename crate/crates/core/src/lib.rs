//! Natural gradient descent with pullback metrics.
//!
//! A metric on parameter space is obtained by pulling a reference metric
//! `G_Y` back through a map `f: X → Y`, giving `G_X = Jᵀ G_Y J`. The metric
//! is only ever applied through Jacobian-vector products, and the natural
//! direction is found with conjugate gradients.
//!
//! * [`metric`]: reference maps and metrics, pullbacks, the CG solver.
//! * [`optim`]: gradient descent, nonlinear CG and natural gradient descent
//!   behind one line search.
//! * [`problems`]: Rayleigh quotient, classical Heisenberg lattice and
//!   matrix product state fitting.
//! * [`oracles`]: dense reference computations for testing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod metric;
pub mod optim;
pub mod oracles;
pub mod problems;
pub mod rng;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/pullback-metrics.md")]
    mod pullback_metrics {}
    #[doc = include_str!("../../../book/src/natural-direction.md")]
    mod natural_direction {}
    #[doc = include_str!("../../../book/src/hessian-reference.md")]
    mod hessian_reference {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
    #[doc = include_str!("../../../book/src/rayleigh.md")]
    mod rayleigh {}
    #[doc = include_str!("../../../book/src/spin.md")]
    mod spin {}
    #[doc = include_str!("../../../book/src/mps.md")]
    mod mps {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}

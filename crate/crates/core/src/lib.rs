//! Estimation of exactly and approximately low-rank matrices from noisy
//! linear observations by nuclear-norm regularized least squares
//!
//! ```text
//! Θ̂ ∈ argmin_Θ  (1/2N) ‖y − 𝔛(Θ)‖₂² + λ ‖Θ‖₁
//! ```
//!
//! with simulators for multivariate regression, vector autoregression and
//! compressed sensing, regularization rules, statistical checks of the
//! conditions behind the error bounds, and an experiment harness.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod harness;
pub mod matcore;
pub mod models;
pub mod regsel;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use matcore::DenseMatrix;

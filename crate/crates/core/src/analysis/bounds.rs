//! Deterministic error bounds in terms of `λ`, the restricted curvature `κ`
//! and the structure of `Θ*`.

use crate::error::{Error, Result};
use crate::matcore::{frobenius_norm, DenseMatrix};
use crate::models::{GroundTruth, TruthKind};

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "kappa must be positive, got {kappa}"
        )))
    }
}

/// `max{δ, 32 λ √r / κ, (16 λ a / κ)^{1/2}}` with `a = ‖Π_{M⊥}(Θ*)‖₁`.
pub fn theorem1_bound(
    lambda: f64,
    r: usize,
    kappa: f64,
    approx_term: f64,
    delta: f64,
) -> Result<f64> {
    check_kappa(kappa)?;
    if !(lambda >= 0.0) || !(approx_term >= 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidParameter(
            "bound inputs must be nonnegative".into(),
        ));
    }
    let low_rank = 32.0 * lambda * (r as f64).sqrt() / kappa;
    let approx = (16.0 * lambda * approx_term / kappa).sqrt();
    Ok(delta.max(low_rank).max(approx))
}

/// `max{δ, 32 √R_q (λ/κ)^{1−q/2}}` for `Θ*` in the `ℓ_q` ball of radius `R_q`.
pub fn corollary2_bound(lambda: f64, kappa: f64, q: f64, radius: f64, delta: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "q must lie in [0, 1], got {q}"
        )));
    }
    if !(lambda >= 0.0) || !(radius >= 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidParameter(
            "bound inputs must be nonnegative".into(),
        ));
    }
    Ok(delta.max(32.0 * radius.sqrt() * (lambda / kappa).powf(1.0 - q / 2.0)))
}

/// Tolerance `R_q (√(k/N) + √(p/N))^{2−q}` used for compressed sensing.
pub fn compressed_tolerance(q: f64, radius: f64, k: usize, p: usize, n_obs: usize) -> f64 {
    let n = n_obs as f64;
    radius * ((k as f64 / n).sqrt() + (p as f64 / n).sqrt()).powf(2.0 - q)
}

/// Curvature constants established for each model, on the same scale as
/// the weights returned by `regsel` (`LambdaChoice::value`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaRule {
    /// `σ_min(Σ) / 20`
    Multivar {
        sigma_min: f64,
    },
    /// `σ_min(Σ) / 4`
    Var {
        sigma_min: f64,
    },
    /// `1 / 8`
    Compressed,
    Fixed(f64),
}

impl KappaRule {
    pub fn kappa(&self) -> f64 {
        match *self {
            KappaRule::Multivar { sigma_min } => sigma_min / 20.0,
            KappaRule::Var { sigma_min } => sigma_min / 4.0,
            KappaRule::Compressed => 0.125,
            KappaRule::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRecord {
    pub frob_error: f64,
    pub bound: f64,
    /// `frob_error / bound`
    pub ratio: f64,
}

/// Compares `‖Θ̂ − Θ*‖_F` with the bound that applies to the truth's kind:
/// the exact-rank bound (`δ = 0`, no approximation term) or the `ℓ_q` bound.
pub fn empirical_vs_bound(
    theta_hat: &DenseMatrix,
    truth: &GroundTruth,
    lambda: f64,
    kappa: KappaRule,
) -> Result<BoundRecord> {
    if theta_hat.shape() != truth.shape() {
        return Err(Error::Dimension(
            "estimate and truth differ in shape".into(),
        ));
    }
    let frob_error = frobenius_norm(&(theta_hat - &truth.theta_star));
    let bound = match truth.kind {
        TruthKind::ExactRank { r } => theorem1_bound(lambda, r, kappa.kappa(), 0.0, 0.0)?,
        TruthKind::NearLowRank { q, radius } => {
            corollary2_bound(lambda, kappa.kappa(), q, radius, 0.0)?
        }
    };
    let ratio = if bound > 0.0 {
        frob_error / bound
    } else {
        f64::INFINITY
    };
    Ok(BoundRecord {
        frob_error,
        bound,
        ratio,
    })
}

//! Splitting an error matrix `Δ = Θ̂ − Θ*` relative to the top-`r` singular
//! subspaces `(U, V)` of `Θ*`.
//!
//! With orthogonal completions `[U U⊥]`, `[V V⊥]` and `Γ = [U U⊥]ᵀ Δ [V V⊥]`,
//! `Δ″` keeps only the `Γ₂₂` block, i.e. `Δ″ = U⊥U⊥ᵀ Δ V⊥V⊥ᵀ`, and
//! `Δ′ = Δ − Δ″` has rank at most `2r`.

use crate::error::{Error, Result};
use crate::matcore::{
    frobenius_norm, nuclear_norm, numerical_rank, singular_values, DenseMatrix, SubspacePair,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDecomposition {
    pub delta_prime: DenseMatrix,
    pub delta_dblprime: DenseMatrix,
    pub r: usize,
}

/// Outcome of [`ErrorDecomposition::check`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionCheck {
    /// `‖Δ′ + Δ″ − Δ‖_F / max(‖Δ‖_F, 1)`
    pub sum_error: f64,
    pub rank_delta_prime: usize,
    /// `|‖Π_M(Θ*) + Δ″‖₁ − ‖Π_M(Θ*)‖₁ − ‖Δ″‖₁|`, relative to the larger side.
    pub additivity_error: f64,
    pub r: usize,
}

impl DecompositionCheck {
    pub const SUM_TOL: f64 = 1e-12;
    pub const ADDITIVITY_TOL: f64 = 1e-8;

    pub fn holds(&self) -> bool {
        self.sum_error <= Self::SUM_TOL
            && self.rank_delta_prime <= 2 * self.r
            && self.additivity_error <= Self::ADDITIVITY_TOL
    }
}

pub fn decompose_error(delta: &DenseMatrix, factors: &SubspacePair) -> Result<ErrorDecomposition> {
    if delta.shape() != factors.shape() {
        return Err(Error::Dimension(format!(
            "error is {:?}, subspaces are {:?}",
            delta.shape(),
            factors.shape()
        )));
    }
    let delta_dblprime = factors.project_perp(delta);
    let delta_prime = delta - &delta_dblprime;
    Ok(ErrorDecomposition {
        delta_prime,
        delta_dblprime,
        r: factors.rank(),
    })
}

impl ErrorDecomposition {
    /// Verifies the three structural invariants against independent SVDs.
    pub fn check(
        &self,
        delta: &DenseMatrix,
        theta_star: &DenseMatrix,
        factors: &SubspacePair,
    ) -> Result<DecompositionCheck> {
        let sum = &self.delta_prime + &self.delta_dblprime - delta;
        let sum_error = frobenius_norm(&sum) / frobenius_norm(delta).max(1.0);
        let rank_delta_prime = numerical_rank(&singular_values(&self.delta_prime)?);
        let model_part = factors.project_model(theta_star);
        let lhs = nuclear_norm(&(&model_part + &self.delta_dblprime))?;
        let rhs = nuclear_norm(&model_part)? + nuclear_norm(&self.delta_dblprime)?;
        let additivity_error = (lhs - rhs).abs() / lhs.max(rhs).max(f64::MIN_POSITIVE);
        Ok(DecompositionCheck {
            sum_error,
            rank_delta_prime,
            additivity_error,
            r: self.r,
        })
    }
}

/// The set `{Δ : ‖Δ‖_F ≥ δ, ‖Δ″‖₁ ≤ 3‖Δ′‖₁ + 4‖Π_{M⊥}(Θ*)‖₁}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedSetParams {
    pub r: usize,
    pub delta: f64,
    pub subspaces: SubspacePair,
}

impl RestrictedSetParams {
    pub fn new(subspaces: SubspacePair, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be >= 0, got {delta}"
            )));
        }
        Ok(Self {
            r: subspaces.rank(),
            delta,
            subspaces,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// `‖Δ‖_F − δ`
    pub frobenius_margin: f64,
    /// `3‖Δ′‖₁ + 4‖Π_{M⊥}(Θ*)‖₁ − ‖Δ″‖₁`
    pub cone_margin: f64,
}

pub fn in_restricted_set(
    delta: &DenseMatrix,
    params: &RestrictedSetParams,
    theta_star: &DenseMatrix,
) -> Result<Membership> {
    if theta_star.shape() != delta.shape() {
        return Err(Error::Dimension("error and truth differ in shape".into()));
    }
    let parts = decompose_error(delta, &params.subspaces)?;
    let tail = nuclear_norm(&params.subspaces.project_perp(theta_star))?;
    let prime = nuclear_norm(&parts.delta_prime)?;
    let dbl = nuclear_norm(&parts.delta_dblprime)?;
    let frobenius_margin = frobenius_norm(delta) - params.delta;
    let cone_margin = 3.0 * prime + 4.0 * tail - dbl;
    // SVD round-off on the cone side, scaled to the quantities compared
    let slack = 1e-12 * (prime + tail + dbl);
    Ok(Membership {
        member: frobenius_margin >= 0.0 && cone_margin >= -slack,
        frobenius_margin,
        cone_margin,
    })
}

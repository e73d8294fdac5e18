//! Regularization weights.
//!
//! The closed-form rules return the weight in the form stated for each
//! model. For the regression and autoregressive models that weight belongs
//! to the matrix-form objective, which averages over the `n` vector samples
//! instead of the `N = k n` scalar observations; [`LambdaChoice::solver_weight`]
//! converts it to the scale of the solver's objective by dividing by the
//! number of scalar observations per sample.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matcore::operator_norm;
use crate::models::{LinearMatrixOperator, ObservationSet};
use crate::rng::{gaussian_vector, rng_from_seed};

/// Returned by [`lambda_generic`] when the noise is identically zero.
pub const GENERIC_LAMBDA_FLOOR: f64 = 1e-12;
/// Smallest number of synthetic noise draws [`lambda_generic`] accepts.
pub const MIN_NOISE_DRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// `10 ν √σ_max(Σ) √((k+p)/n)`
    MultivarCor3 {
        nu: f64,
        sigma_max: f64,
        k: usize,
        p: usize,
        n: usize,
    },
    /// `80 ‖Σ‖_op / (1−γ) · √(p/n)`
    VarCor4 {
        sigma_opnorm: f64,
        gamma: f64,
        p: usize,
        n: usize,
    },
    /// `8 ν (√(k/N) + √(p/N))`
    CompressedLemma6 {
        nu: f64,
        k: usize,
        p: usize,
        n_obs: usize,
    },
    /// Twice the 95th percentile of `‖𝔛*(ε)‖_op / N` over synthetic noise.
    GenericAdjoint {
        noise_level: f64,
        draws: usize,
        seed: u64,
    },
    Manual,
}

impl LambdaRule {
    pub fn tag(&self) -> &'static str {
        match self {
            LambdaRule::MultivarCor3 { .. } => "MultivarCor3",
            LambdaRule::VarCor4 { .. } => "VarCor4",
            LambdaRule::CompressedLemma6 { .. } => "CompressedLemma6",
            LambdaRule::GenericAdjoint { .. } => "GenericAdjoint",
            LambdaRule::Manual => "Manual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaChoice {
    /// Weight as given by the rule.
    pub value: f64,
    /// The rule and the inputs it consumed.
    pub rule: LambdaRule,
    /// Scalar observations per vector sample the rule's objective averages
    /// over (`k` for regression, `p` for VAR, 1 otherwise).
    pub obs_per_sample: usize,
}

impl LambdaChoice {
    /// A user-supplied weight already on the solver's scale.
    pub fn manual(value: f64) -> Result<Self> {
        check_positive("lambda", value)?;
        Ok(Self {
            value,
            rule: LambdaRule::Manual,
            obs_per_sample: 1,
        })
    }

    /// Weight for the per-scalar objective `(1/2N)‖y − 𝔛(Θ)‖² + λ‖Θ‖₁`.
    pub fn solver_weight(&self) -> f64 {
        self.value / self.obs_per_sample as f64
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn check_count(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::InvalidParameter(format!("{name} must be >= 1")))
    } else {
        Ok(())
    }
}

pub fn lambda_multivar(
    nu: f64,
    sigma_max: f64,
    k: usize,
    p: usize,
    n: usize,
) -> Result<LambdaChoice> {
    check_positive("nu", nu)?;
    check_positive("sigma_max", sigma_max)?;
    check_count("k", k)?;
    check_count("p", p)?;
    check_count("n", n)?;
    let value = 10.0 * nu * sigma_max.sqrt() * ((k + p) as f64 / n as f64).sqrt();
    Ok(LambdaChoice {
        value,
        rule: LambdaRule::MultivarCor3 {
            nu,
            sigma_max,
            k,
            p,
            n,
        },
        obs_per_sample: k,
    })
}

pub fn lambda_var(sigma_opnorm: f64, gamma: f64, p: usize, n: usize) -> Result<LambdaChoice> {
    check_positive("sigma_opnorm", sigma_opnorm)?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in [0, 1), got {gamma}"
        )));
    }
    check_count("p", p)?;
    check_count("n", n)?;
    let value = 80.0 * sigma_opnorm / (1.0 - gamma) * (p as f64 / n as f64).sqrt();
    Ok(LambdaChoice {
        value,
        rule: LambdaRule::VarCor4 {
            sigma_opnorm,
            gamma,
            p,
            n,
        },
        obs_per_sample: p,
    })
}

pub fn lambda_compressed(nu: f64, k: usize, p: usize, n_obs: usize) -> Result<LambdaChoice> {
    check_positive("nu", nu)?;
    check_count("k", k)?;
    check_count("p", p)?;
    check_count("N", n_obs)?;
    let n = n_obs as f64;
    let value = 8.0 * nu * ((k as f64 / n).sqrt() + (p as f64 / n).sqrt());
    Ok(LambdaChoice {
        value,
        rule: LambdaRule::CompressedLemma6 { nu, k, p, n_obs },
        obs_per_sample: 1,
    })
}

/// `2 ‖𝔛*(ε)‖_op / N` for a given noise vector.
pub fn noise_adjoint_level(op: &dyn LinearMatrixOperator, noise: &DVector<f64>) -> Result<f64> {
    let n = op.shape().n_obs as f64;
    Ok(2.0 * operator_norm(&op.adjoint(noise))? / n)
}

/// Monte-Carlo surrogate: draws `count` noise vectors `ε ~ N(0, ν² I_N)`
/// against the set's operator and returns twice the empirical 95th
/// percentile of `‖𝔛*(ε)‖_op / N`, floored at [`GENERIC_LAMBDA_FLOOR`].
pub fn lambda_generic(obs: &ObservationSet, count: usize, seed: u64) -> Result<LambdaChoice> {
    if count < MIN_NOISE_DRAWS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_NOISE_DRAWS} noise draws, got {count}"
        )));
    }
    let nu = obs.noise_level;
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::InvalidParameter(format!("unknown noise level {nu}")));
    }
    let rule = LambdaRule::GenericAdjoint {
        noise_level: nu,
        draws: count,
        seed,
    };
    if nu == 0.0 {
        return Ok(LambdaChoice {
            value: GENERIC_LAMBDA_FLOOR,
            rule,
            obs_per_sample: 1,
        });
    }
    let op = &obs.operator;
    let n_obs = op.shape().n_obs;
    let mut rng = rng_from_seed(seed);
    let mut levels = Vec::with_capacity(count);
    for _ in 0..count {
        let eps = gaussian_vector(n_obs, &mut rng) * nu;
        levels.push(operator_norm(&op.adjoint(&eps))? / n_obs as f64);
    }
    levels.sort_by(f64::total_cmp);
    let idx = ((0.95 * count as f64).ceil() as usize).clamp(1, count) - 1;
    Ok(LambdaChoice {
        value: (2.0 * levels[idx]).max(GENERIC_LAMBDA_FLOOR),
        rule,
        obs_per_sample: 1,
    })
}

/// Whether `choice` satisfies `λ ≥ 2‖𝔛*(ε)‖_op / N` for the set's realized
/// noise. Fails if the set carries no noise vector.
pub fn premise_holds(obs: &ObservationSet, choice: &LambdaChoice) -> Result<bool> {
    let noise = obs
        .noise
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("observation set has no noise record".into()))?;
    Ok(choice.solver_weight() >= noise_adjoint_level(&obs.operator, noise)?)
}

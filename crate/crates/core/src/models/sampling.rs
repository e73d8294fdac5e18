//! Simulators for the three observation models.

use nalgebra::{DVector, SymmetricEigen};

use super::{
    DesignOperator, GaussianOperator, GroundTruth, IdentityOperator, ModelKind, ModelParams,
    ObservationSet, Operator,
};
use crate::error::{Error, Result};
use crate::matcore::{operator_norm, DenseMatrix};
use crate::rng::{gaussian_matrix, gaussian_vector, rng_from_seed, Rng};

use super::lyapunov::solve_lyapunov;

/// Upper limit on the bytes a materialized Gaussian operator may occupy.
pub const DEFAULT_MEMORY_BUDGET_BYTES: u64 = 2 << 30;

/// Symmetric square root `S = V diag(√λ) Vᵀ` of a symmetric positive
/// definite matrix, so that `S Sᵀ = Σ`.
pub fn symmetric_sqrt(sigma: &DenseMatrix) -> Result<DenseMatrix> {
    if !sigma.is_square() || sigma.nrows() == 0 {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    if !sigma.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("covariance"));
    }
    let scale = sigma.amax();
    let asym = (sigma - sigma.transpose()).amax();
    if asym > 1e-12 * scale.max(1.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let eig = SymmetricEigen::new((sigma + sigma.transpose()) * 0.5);
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let roots = eig.eigenvalues.map(f64::sqrt);
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &r) in roots.iter().enumerate() {
        scaled.column_mut(j).scale_mut(r);
    }
    Ok(scaled * v.transpose())
}

/// `n` rows drawn i.i.d. from `N(0, S Sᵀ)` given the square root `S`.
pub fn gaussian_rows(n: usize, sqrt: &DenseMatrix, rng: &mut Rng) -> DenseMatrix {
    let g = gaussian_matrix(n, sqrt.nrows(), rng);
    g * sqrt.transpose()
}

fn check_noise(nu: f64) -> Result<()> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise level must be >= 0, got {nu}"
        )));
    }
    Ok(())
}

/// Multivariate regression `z_a = Θ* x_a + w_a` with `x_a ~ N(0, Σ)` and
/// `w_a ~ N(0, ν² I_k)`, scalarized into `N = k n` observations.
pub fn sample_multivar(
    truth: &GroundTruth,
    n: usize,
    sigma_x: &DenseMatrix,
    nu: f64,
    seed: u64,
) -> Result<ObservationSet> {
    check_noise(nu)?;
    let (k, p) = truth.shape();
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if sigma_x.shape() != (p, p) {
        return Err(Error::Dimension(format!(
            "covariate covariance is {:?}, expected {p}x{p}",
            sigma_x.shape()
        )));
    }
    let sqrt = symmetric_sqrt(sigma_x)?;
    let mut rng = rng_from_seed(seed);
    let design = gaussian_rows(n, &sqrt, &mut rng);
    let w = gaussian_matrix(n, k, &mut rng) * nu;
    let responses = &design * truth.theta_star.transpose() + &w;
    let operator = DesignOperator::new(design, k, ModelKind::Multivar)?;
    let set = ObservationSet {
        y: DVector::from_column_slice(responses.as_slice()),
        operator: Operator::Design(operator),
        noise_level: nu,
        seed,
        params: ModelParams::Multivar {
            sigma_x: sigma_x.clone(),
        },
        noise: Some(DVector::from_column_slice(w.as_slice())),
        theta_star: Some(truth.theta_star.clone()),
    };
    set.validate()?;
    Ok(set)
}

/// Parameters of a stationary VAR(1) process `Z_{t+1} = Θ* Z_t + W_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarParams {
    pub theta_star: DenseMatrix,
    /// Innovation standard deviation.
    pub nu: f64,
    /// Path length (number of regression rows).
    pub n: usize,
    /// Bound on `‖Θ*‖_op`.
    pub gamma: f64,
    /// Stationary covariance.
    pub sigma: DenseMatrix,
}

impl VarParams {
    pub fn new(theta_star: DenseMatrix, nu: f64, n: usize, gamma: f64) -> Result<Self> {
        if !(gamma < 1.0) || !(gamma >= 0.0) {
            return Err(Error::Unstable(gamma));
        }
        let norm = operator_norm(&theta_star)?;
        if norm > gamma * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "operator norm {norm} exceeds the stated bound {gamma}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("path length must be >= 1".into()));
        }
        let sigma = solve_lyapunov(&theta_star, nu)?;
        Ok(Self {
            theta_star,
            nu,
            n,
            gamma,
            sigma,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_star.nrows()
    }
}

/// Stationary VAR sample path: `Z₁ ~ N(0, Σ)` then the recursion, giving
/// design rows `Z₁..Zₙ` and responses `Z₂..Zₙ₊₁`.
pub fn sample_var(params: &VarParams, seed: u64) -> Result<ObservationSet> {
    let p = params.dim();
    let n = params.n;
    let sqrt = symmetric_sqrt(&params.sigma)?;
    let mut rng = rng_from_seed(seed);
    let mut z = &sqrt * gaussian_vector(p, &mut rng);
    let mut design = DenseMatrix::zeros(n, p);
    let mut responses = DenseMatrix::zeros(n, p);
    let mut innovations = DenseMatrix::zeros(n, p);
    for t in 0..n {
        let w = gaussian_vector(p, &mut rng) * params.nu;
        let next = &params.theta_star * &z + &w;
        design.set_row(t, &z.transpose());
        responses.set_row(t, &next.transpose());
        innovations.set_row(t, &w.transpose());
        z = next;
    }
    let operator = DesignOperator::new(design, p, ModelKind::Var)?;
    let set = ObservationSet {
        y: DVector::from_column_slice(responses.as_slice()),
        operator: Operator::Design(operator),
        noise_level: params.nu,
        seed,
        params: ModelParams::Var(params.clone()),
        noise: Some(DVector::from_column_slice(innovations.as_slice())),
        theta_star: Some(params.theta_star.clone()),
    };
    set.validate()?;
    Ok(set)
}

/// Compressed sensing with `N` materialized i.i.d. N(0,1) observation
/// matrices and N(0, ν²) noise.
pub fn sample_compressed(
    truth: &GroundTruth,
    n_obs: usize,
    nu: f64,
    seed: u64,
) -> Result<ObservationSet> {
    sample_compressed_with_budget(truth, n_obs, nu, seed, DEFAULT_MEMORY_BUDGET_BYTES)
}

pub fn sample_compressed_with_budget(
    truth: &GroundTruth,
    n_obs: usize,
    nu: f64,
    seed: u64,
    budget_bytes: u64,
) -> Result<ObservationSet> {
    check_noise(nu)?;
    if n_obs == 0 {
        return Err(Error::InvalidParameter(
            "need at least one observation".into(),
        ));
    }
    let (k, p) = truth.shape();
    let requested = (n_obs as u64)
        .saturating_mul((k * p) as u64)
        .saturating_mul(std::mem::size_of::<f64>() as u64);
    if requested > budget_bytes {
        return Err(Error::MemoryBudget {
            requested,
            budget: budget_bytes,
        });
    }
    let mut rng = rng_from_seed(seed);
    // Row i holds vec(Xᵢ); draws are observation-major so a prefix of a
    // larger sample reproduces a smaller one.
    let stacked = gaussian_matrix(n_obs, k * p, &mut rng);
    let operator = GaussianOperator::from_stacked(k, p, stacked)?;
    let eps = gaussian_vector(n_obs, &mut rng) * nu;
    let clean = super::LinearMatrixOperator::apply(&operator, &truth.theta_star);
    let set = ObservationSet {
        y: clean + &eps,
        operator: Operator::Gaussian(operator),
        noise_level: nu,
        seed,
        params: ModelParams::Compressed,
        noise: Some(eps),
        theta_star: Some(truth.theta_star.clone()),
    };
    set.validate()?;
    Ok(set)
}

/// Every entry observed once with N(0, ν²) noise.
pub fn sample_identity(truth: &GroundTruth, nu: f64, seed: u64) -> Result<ObservationSet> {
    check_noise(nu)?;
    let (k, p) = truth.shape();
    let mut rng = rng_from_seed(seed);
    let eps = gaussian_vector(k * p, &mut rng) * nu;
    let y = DVector::from_column_slice(truth.theta_star.as_slice()) + &eps;
    let set = ObservationSet {
        y,
        operator: Operator::Identity(IdentityOperator::new(k, p)),
        noise_level: nu,
        seed,
        params: ModelParams::Identity,
        noise: Some(eps),
        theta_star: Some(truth.theta_star.clone()),
    };
    set.validate()?;
    Ok(set)
}

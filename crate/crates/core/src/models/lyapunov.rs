//! Stationary covariance of a stable VAR(1): the fixed point
//! `Σ = Θ Σ Θᵀ + ν² I`.

use crate::error::{Error, Result};
use crate::matcore::{frobenius_norm, operator_norm, DenseMatrix};

/// Dimensions up to this size are solved through the `p² × p²` Kronecker
/// system; larger ones use the doubling iteration.
pub const KRONECKER_MAX_DIM: usize = 16;

const RESIDUAL_TOL: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 64;

fn check_inputs(theta: &DenseMatrix, nu: f64) -> Result<()> {
    if !theta.is_square() || theta.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "system matrix must be square, got {:?}",
            theta.shape()
        )));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "innovation std must be > 0, got {nu}"
        )));
    }
    let gamma = operator_norm(theta)?;
    if gamma >= 1.0 {
        return Err(Error::Unstable(gamma));
    }
    Ok(())
}

pub(crate) fn lyapunov_residual(theta: &DenseMatrix, nu: f64, sigma: &DenseMatrix) -> f64 {
    let p = theta.nrows();
    let r = sigma - theta * sigma * theta.transpose() - DenseMatrix::identity(p, p) * (nu * nu);
    frobenius_norm(&r)
}

fn symmetrize(m: DenseMatrix) -> DenseMatrix {
    (&m + m.transpose()) * 0.5
}

/// Solves `(I − Θ⊗Θ) vec(Σ) = ν² vec(I)` directly.
pub fn solve_lyapunov_kronecker(theta: &DenseMatrix, nu: f64) -> Result<DenseMatrix> {
    check_inputs(theta, nu)?;
    let p = theta.nrows();
    let system = DenseMatrix::identity(p * p, p * p) - theta.kronecker(theta);
    let rhs = DenseMatrix::identity(p, p) * (nu * nu);
    let rhs = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParameter("singular Lyapunov system".into()))?;
    Ok(symmetrize(DenseMatrix::from_column_slice(
        p,
        p,
        sol.as_slice(),
    )))
}

/// Smith's doubling iteration: `Σ ← Σ + A Σ Aᵀ`, `A ← A²`, starting from
/// `Σ = ν² I`, `A = Θ`. After `j` steps `Σ` sums the first `2ʲ` terms of
/// `Σₜ Θᵗ ν² (Θᵗ)ᵀ`.
pub fn solve_lyapunov_doubling(theta: &DenseMatrix, nu: f64) -> Result<DenseMatrix> {
    check_inputs(theta, nu)?;
    let p = theta.nrows();
    let mut a = theta.clone();
    let mut sigma = DenseMatrix::identity(p, p) * (nu * nu);
    for _ in 0..MAX_DOUBLINGS {
        let increment = &a * &sigma * a.transpose();
        let inc_norm = frobenius_norm(&increment);
        sigma += increment;
        if inc_norm <= f64::EPSILON * frobenius_norm(&sigma) {
            break;
        }
        a = &a * &a;
    }
    Ok(symmetrize(sigma))
}

/// Stationary covariance for `‖Θ‖_op < 1`, `ν > 0`.
pub fn solve_lyapunov(theta: &DenseMatrix, nu: f64) -> Result<DenseMatrix> {
    let sigma = if theta.nrows() <= KRONECKER_MAX_DIM {
        solve_lyapunov_kronecker(theta, nu)?
    } else {
        solve_lyapunov_doubling(theta, nu)?
    };
    let res = lyapunov_residual(theta, nu, &sigma);
    let tol = RESIDUAL_TOL * frobenius_norm(&sigma).max(1.0);
    if !(res <= tol) {
        return Err(Error::InvalidParameter(format!(
            "Lyapunov residual {res:e} exceeds {tol:e}"
        )));
    }
    Ok(sigma)
}

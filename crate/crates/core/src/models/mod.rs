//! Observation models `y = 𝔛(Θ*) + ε`.
//!
//! An observation operator maps `k×p` matrices to length-`N` vectors through
//! trace inner products with observation matrices `Xᵢ`; its adjoint maps a
//! vector `u` back to `Σ uᵢ Xᵢ`. Three concrete families are provided:
//!
//! * [`DesignOperator`]: `Xᵢ = e_b x_aᵀ` for rows `x_a` of a design matrix,
//!   which covers multivariate regression and VAR system identification;
//! * [`GaussianOperator`]: materialized i.i.d. N(0,1) observation matrices
//!   (compressed sensing);
//! * [`IdentityOperator`]: one observation per entry.

mod io;
mod lyapunov;
mod sampling;
mod truth;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;

pub use io::{read_observation_set, write_observation_set};
pub use lyapunov::{solve_lyapunov, solve_lyapunov_doubling, solve_lyapunov_kronecker};
pub use sampling::{
    gaussian_rows, sample_compressed, sample_compressed_with_budget, sample_identity,
    sample_multivar, sample_var, symmetric_sqrt, VarParams, DEFAULT_MEMORY_BUDGET_BYTES,
};
pub use truth::{
    generate_exact_lowrank, generate_near_lowrank, haar_orthonormal, GroundTruth, TruthKind,
};

/// `(k, p, N)`: matrix dimensions and number of scalar observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorShape {
    pub k: usize,
    pub p: usize,
    pub n_obs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Identity,
    Multivar,
    Var,
    Compressed,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Identity => "identity",
            ModelKind::Multivar => "multivar",
            ModelKind::Var => "var",
            ModelKind::Compressed => "compressed",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            ModelKind::Identity => 0,
            ModelKind::Multivar => 1,
            ModelKind::Var => 2,
            ModelKind::Compressed => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ModelKind::Identity),
            1 => Some(ModelKind::Multivar),
            2 => Some(ModelKind::Var),
            3 => Some(ModelKind::Compressed),
            _ => None,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ModelKind::Identity),
            "multivar" | "regression" => Ok(ModelKind::Multivar),
            "var" => Ok(ModelKind::Var),
            "compressed" => Ok(ModelKind::Compressed),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Linear map `𝔛: ℝ^{k×p} → ℝ^N` together with its adjoint.
pub trait LinearMatrixOperator: Send + Sync {
    fn shape(&self) -> OperatorShape;

    fn kind(&self) -> ModelKind;

    /// `[𝔛(Θ)]ᵢ = ⟨⟨Xᵢ, Θ⟩⟩`
    fn apply(&self, theta: &DenseMatrix) -> DVector<f64>;

    /// `𝔛*(u) = Σ uᵢ Xᵢ`
    fn adjoint(&self, u: &DVector<f64>) -> DenseMatrix;

    /// `𝔛*(𝔛(Θ))`
    fn normal(&self, theta: &DenseMatrix) -> DenseMatrix {
        self.adjoint(&self.apply(theta))
    }

    /// A `p×p` matrix `G` with `𝔛*(𝔛(Θ)) = Θ G`, when the operator has one.
    fn right_gram(&self) -> Option<&DenseMatrix> {
        None
    }
}

/// One observation per entry, stacked column-major (`i = a + b·k`).
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityOperator {
    k: usize,
    p: usize,
}

impl IdentityOperator {
    pub fn new(k: usize, p: usize) -> Self {
        Self { k, p }
    }
}

pub fn identity_operator(k: usize, p: usize) -> IdentityOperator {
    IdentityOperator::new(k, p)
}

impl LinearMatrixOperator for IdentityOperator {
    fn shape(&self) -> OperatorShape {
        OperatorShape {
            k: self.k,
            p: self.p,
            n_obs: self.k * self.p,
        }
    }

    fn kind(&self) -> ModelKind {
        ModelKind::Identity
    }

    fn apply(&self, theta: &DenseMatrix) -> DVector<f64> {
        DVector::from_column_slice(theta.as_slice())
    }

    fn adjoint(&self, u: &DVector<f64>) -> DenseMatrix {
        DenseMatrix::from_column_slice(self.k, self.p, u.as_slice())
    }

    fn normal(&self, theta: &DenseMatrix) -> DenseMatrix {
        theta.clone()
    }
}

/// Observation matrices `Xᵢ = e_b x_aᵀ` built from the rows `x_a` of an
/// `n×p` design matrix, for `a < n`, `b < k`.
///
/// Observation `(a, b)` sits at index `i = a + b·n`, so `𝔛(Θ)` is the
/// column-major stacking of the `n×k` matrix `X Θᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignOperator {
    design: DenseMatrix,
    k: usize,
    kind: ModelKind,
    gram: DenseMatrix,
}

impl DesignOperator {
    pub fn new(design: DenseMatrix, k: usize, kind: ModelKind) -> Result<Self> {
        if k == 0 || design.ncols() == 0 {
            return Err(Error::Dimension("design operator needs k, p >= 1".into()));
        }
        if !design.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        let gram = design.tr_mul(&design);
        Ok(Self {
            design,
            k,
            kind,
            gram,
        })
    }

    /// Multivariate regression with `k` outputs.
    pub fn multivar(design: DenseMatrix, k: usize) -> Result<Self> {
        Self::new(design, k, ModelKind::Multivar)
    }

    pub fn design(&self) -> &DenseMatrix {
        &self.design
    }

    /// Number of design rows (vector samples).
    pub fn samples(&self) -> usize {
        self.design.nrows()
    }

    /// Flat observation index of the pair (sample `a`, output `b`).
    pub fn index(&self, a: usize, b: usize) -> usize {
        a + b * self.design.nrows()
    }
}

pub fn multivar_operator(design: DenseMatrix, k: usize) -> Result<DesignOperator> {
    DesignOperator::multivar(design, k)
}

impl LinearMatrixOperator for DesignOperator {
    fn shape(&self) -> OperatorShape {
        OperatorShape {
            k: self.k,
            p: self.design.ncols(),
            n_obs: self.design.nrows() * self.k,
        }
    }

    fn kind(&self) -> ModelKind {
        self.kind
    }

    fn apply(&self, theta: &DenseMatrix) -> DVector<f64> {
        let fitted = &self.design * theta.transpose();
        DVector::from_column_slice(fitted.as_slice())
    }

    fn adjoint(&self, u: &DVector<f64>) -> DenseMatrix {
        let n = self.design.nrows();
        let stacked = nalgebra::DMatrixView::from_slice(u.as_slice(), n, self.k);
        stacked.tr_mul(&self.design)
    }

    fn normal(&self, theta: &DenseMatrix) -> DenseMatrix {
        theta * &self.gram
    }

    fn right_gram(&self) -> Option<&DenseMatrix> {
        Some(&self.gram)
    }
}

/// Materialized Gaussian observation matrices, stored as an `N × kp` matrix
/// whose row `i` is `vec(Xᵢ)` in column-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianOperator {
    k: usize,
    p: usize,
    stacked: DenseMatrix,
}

impl GaussianOperator {
    /// Wraps explicit observation matrices; used for permutation and
    /// single-term checks as well as by the sampler.
    pub fn from_matrices(mats: &[DenseMatrix]) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| Error::Dimension("need at least one observation matrix".into()))?;
        let (k, p) = first.shape();
        let mut stacked = DenseMatrix::zeros(mats.len(), k * p);
        for (i, x) in mats.iter().enumerate() {
            if x.shape() != (k, p) {
                return Err(Error::Dimension(format!(
                    "observation matrix {i} is {:?}, expected {:?}",
                    x.shape(),
                    (k, p)
                )));
            }
            for (j, v) in x.as_slice().iter().enumerate() {
                stacked[(i, j)] = *v;
            }
        }
        Self::from_stacked(k, p, stacked)
    }

    pub fn from_stacked(k: usize, p: usize, stacked: DenseMatrix) -> Result<Self> {
        if stacked.ncols() != k * p || stacked.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "stacked operator is {:?}, expected N x {}",
                stacked.shape(),
                k * p
            )));
        }
        if !stacked.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("observation matrices"));
        }
        Ok(Self { k, p, stacked })
    }

    pub fn stacked(&self) -> &DenseMatrix {
        &self.stacked
    }

    pub fn observation_matrix(&self, i: usize) -> DenseMatrix {
        let row: Vec<f64> = self.stacked.row(i).iter().copied().collect();
        DenseMatrix::from_column_slice(self.k, self.p, &row)
    }

    /// Reorders observations: new row `j` is old row `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.stacked.nrows() {
            return Err(Error::Dimension("permutation length".into()));
        }
        let stacked = self.stacked.select_rows(perm.iter());
        Self::from_stacked(self.k, self.p, stacked)
    }
}

impl LinearMatrixOperator for GaussianOperator {
    fn shape(&self) -> OperatorShape {
        OperatorShape {
            k: self.k,
            p: self.p,
            n_obs: self.stacked.nrows(),
        }
    }

    fn kind(&self) -> ModelKind {
        ModelKind::Compressed
    }

    fn apply(&self, theta: &DenseMatrix) -> DVector<f64> {
        let v = nalgebra::DVectorView::from_slice(theta.as_slice(), self.k * self.p);
        &self.stacked * v
    }

    fn adjoint(&self, u: &DVector<f64>) -> DenseMatrix {
        let flat = self.stacked.tr_mul(u);
        DenseMatrix::from_column_slice(self.k, self.p, flat.as_slice())
    }
}

/// Closed set of concrete operators, so observation sets can be cloned and
/// serialized without trait objects.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Identity(IdentityOperator),
    Design(DesignOperator),
    Gaussian(GaussianOperator),
}

impl Operator {
    fn inner(&self) -> &dyn LinearMatrixOperator {
        match self {
            Operator::Identity(op) => op,
            Operator::Design(op) => op,
            Operator::Gaussian(op) => op,
        }
    }
}

impl LinearMatrixOperator for Operator {
    fn shape(&self) -> OperatorShape {
        self.inner().shape()
    }
    fn kind(&self) -> ModelKind {
        self.inner().kind()
    }
    fn apply(&self, theta: &DenseMatrix) -> DVector<f64> {
        self.inner().apply(theta)
    }
    fn adjoint(&self, u: &DVector<f64>) -> DenseMatrix {
        self.inner().adjoint(u)
    }
    fn normal(&self, theta: &DenseMatrix) -> DenseMatrix {
        self.inner().normal(theta)
    }
    fn right_gram(&self) -> Option<&DenseMatrix> {
        self.inner().right_gram()
    }
}

/// Model-specific generation parameters carried alongside the data.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Identity,
    Multivar { sigma_x: DenseMatrix },
    Var(VarParams),
    Compressed,
}

/// Noisy observations `y = 𝔛(Θ*) + ε` plus everything needed to reproduce
/// or evaluate them.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub y: DVector<f64>,
    pub operator: Operator,
    pub noise_level: f64,
    pub seed: u64,
    pub params: ModelParams,
    /// The realized noise vector `ε`, when the set came from a simulator.
    pub noise: Option<DVector<f64>>,
    /// Ground truth, when known.
    pub theta_star: Option<DenseMatrix>,
}

impl ObservationSet {
    /// Assembles a set from explicit parts, checking that `y` matches `N`.
    pub fn new(y: DVector<f64>, operator: Operator, noise_level: f64) -> Result<Self> {
        let set = Self {
            y,
            operator,
            noise_level,
            seed: 0,
            params: ModelParams::Identity,
            noise: None,
            theta_star: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.operator.shape().n_obs;
        if self.y.len() != n {
            return Err(Error::Dimension(format!(
                "y has length {}, operator has N = {n}",
                self.y.len()
            )));
        }
        if let Some(noise) = &self.noise {
            if noise.len() != n {
                return Err(Error::Dimension("noise length differs from N".into()));
            }
        }
        if !self.y.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("observation vector"));
        }
        if !(self.noise_level >= 0.0) {
            return Err(Error::InvalidParameter("noise level must be >= 0".into()));
        }
        Ok(())
    }

    pub fn shape(&self) -> OperatorShape {
        self.operator.shape()
    }

    pub fn kind(&self) -> ModelKind {
        self.operator.kind()
    }

    /// Vector samples behind the scalarized observations (`n` for design
    /// operators, `N` otherwise).
    pub fn samples(&self) -> usize {
        match &self.operator {
            Operator::Design(op) => op.samples(),
            _ => self.shape().n_obs,
        }
    }
}

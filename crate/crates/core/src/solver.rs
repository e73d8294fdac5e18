//! Accelerated proximal gradient for
//!
//! ```text
//! minimize  F(Θ) = (1/2N) ‖y − 𝔛(Θ)‖₂² + λ ‖Θ‖₁
//! ```
//!
//! Each step is `Θ ← svt(Y − η ∇f(Y), ηλ)`. With acceleration, `Y` is the
//! usual two-sequence momentum point; whenever the momentum step would raise
//! the objective the momentum is reset and a plain step from the current
//! iterate is taken instead, so the objective trace is nonincreasing in both
//! modes.
//!
//! Operators exposing a right Gram matrix (`𝔛*𝔛(Θ) = Θ G`) are handled in
//! `k×p` space without ever forming `𝔛(Θ)`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matcore::{
    composed_operator_norm, frobenius_norm, nuclear_norm, numerical_rank, operator_norm, svd,
    svt_parts, trace_inner, DenseMatrix,
};
use crate::models::{LinearMatrixOperator, ObservationSet};

/// Power iterations used to size the step.
pub const DEFAULT_POWER_ITERS: usize = 30;
const POWER_SEED: u64 = 0x5eed;
const STEP_SAFETY: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `0.99 / L̂` with `L̂` from power iteration on the composed operator.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Weight on the nuclear norm, in the per-scalar-observation objective.
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once `|F_k − F_{k+1}| / |F_k|` drops below this.
    pub rel_tol: f64,
    pub step: StepSize,
    pub acceleration: bool,
    pub power_iters: usize,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            max_iters: 5000,
            rel_tol: 1e-9,
            step: StepSize::Auto,
            acceleration: true,
            power_iters: DEFAULT_POWER_ITERS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("rel_tol must be > 0".into()));
        }
        if let StepSize::Fixed(s) = self.step {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "step must be > 0, got {s}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub theta_hat: DenseMatrix,
    /// Objective before the first step, then after every step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// `max(‖(1/N) 𝔛*(𝔛(Θ̂) − y)‖_op − λ, 0)`
    pub optimality_residual: f64,
    pub converged: bool,
    pub rank: usize,
    pub step: f64,
}

impl SolveResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

trait Smooth {
    type Image: Clone;
    fn image(&self, theta: &DenseMatrix) -> Self::Image;
    fn lincomb(&self, a: &Self::Image, wa: f64, b: &Self::Image, wb: f64) -> Self::Image;
    fn value(&self, theta: &DenseMatrix, img: &Self::Image) -> f64;
    fn gradient(&self, img: &Self::Image) -> DenseMatrix;
}

/// Image is `𝔛(Θ)`.
struct Direct<'a> {
    op: &'a dyn LinearMatrixOperator,
    y: &'a DVector<f64>,
    n_obs: f64,
}

impl Smooth for Direct<'_> {
    type Image = DVector<f64>;

    fn image(&self, theta: &DenseMatrix) -> DVector<f64> {
        self.op.apply(theta)
    }

    fn lincomb(&self, a: &DVector<f64>, wa: f64, b: &DVector<f64>, wb: f64) -> DVector<f64> {
        a * wa + b * wb
    }

    fn value(&self, _theta: &DenseMatrix, img: &DVector<f64>) -> f64 {
        (img - self.y).norm_squared() / (2.0 * self.n_obs)
    }

    fn gradient(&self, img: &DVector<f64>) -> DenseMatrix {
        self.op.adjoint(&(img - self.y)) / self.n_obs
    }
}

/// Image is `Θ G`; `f = (⟨Θ, ΘG⟩ − 2⟨Θ, 𝔛*y⟩ + ‖y‖²) / 2N`.
struct Gram<'a> {
    gram: &'a DenseMatrix,
    adj_y: DenseMatrix,
    y_sq: f64,
    n_obs: f64,
}

impl Smooth for Gram<'_> {
    type Image = DenseMatrix;

    fn image(&self, theta: &DenseMatrix) -> DenseMatrix {
        theta * self.gram
    }

    fn lincomb(&self, a: &DenseMatrix, wa: f64, b: &DenseMatrix, wb: f64) -> DenseMatrix {
        a * wa + b * wb
    }

    fn value(&self, theta: &DenseMatrix, img: &DenseMatrix) -> f64 {
        let quad = trace_inner(theta, img) - 2.0 * trace_inner(theta, &self.adj_y) + self.y_sq;
        quad.max(0.0) / (2.0 * self.n_obs)
    }

    fn gradient(&self, img: &DenseMatrix) -> DenseMatrix {
        (img - &self.adj_y) / self.n_obs
    }
}

fn check_problem(op: &dyn LinearMatrixOperator, y: &DVector<f64>) -> Result<()> {
    let shape = op.shape();
    if y.len() != shape.n_obs {
        return Err(Error::Dimension(format!(
            "y has length {}, operator has N = {}",
            y.len(),
            shape.n_obs
        )));
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("observation vector"));
    }
    Ok(())
}

/// Step size the solver would use for this operator and configuration.
pub fn step_size(op: &dyn LinearMatrixOperator, cfg: &SolverConfig) -> f64 {
    match cfg.step {
        StepSize::Fixed(s) => s,
        StepSize::Auto => {
            let l = composed_operator_norm(op, cfg.power_iters, POWER_SEED);
            if l > 0.0 {
                STEP_SAFETY / l
            } else {
                1.0
            }
        }
    }
}

/// `F(Θ)`, evaluated directly through `𝔛(Θ)`.
pub fn objective(
    op: &dyn LinearMatrixOperator,
    y: &DVector<f64>,
    theta: &DenseMatrix,
    lambda: f64,
) -> Result<f64> {
    let n = op.shape().n_obs as f64;
    Ok((y - op.apply(theta)).norm_squared() / (2.0 * n) + lambda * nuclear_norm(theta)?)
}

/// Gradient of the smooth part, `(1/N) 𝔛*(𝔛(Θ) − y)`.
pub fn smooth_gradient(
    op: &dyn LinearMatrixOperator,
    y: &DVector<f64>,
    theta: &DenseMatrix,
) -> DenseMatrix {
    let n = op.shape().n_obs as f64;
    op.adjoint(&(op.apply(theta) - y)) / n
}

/// `max(‖∇f(Θ)‖_op − λ, 0)`.
pub fn optimality_residual(
    op: &dyn LinearMatrixOperator,
    y: &DVector<f64>,
    theta: &DenseMatrix,
    lambda: f64,
) -> Result<f64> {
    Ok((operator_norm(&smooth_gradient(op, y, theta))? - lambda).max(0.0))
}

/// Distance of `−∇f(Θ)` from `λ ∂‖Θ‖₁`, measured blockwise in the singular
/// bases of `Θ = U S Vᵀ`:
///
/// * `‖Uᵀ G V − λ I‖_op` (alignment with `λ U Vᵀ` on the span),
/// * `‖Uᵀ G V⊥‖_op`, `‖U⊥ᵀ G V‖_op` (cross blocks must vanish),
/// * `max(‖U⊥ᵀ G V⊥‖_op − λ, 0)`,
///
/// where `G = −∇f(Θ)`. Returns the largest of the four.
pub fn subgradient_residual(
    op: &dyn LinearMatrixOperator,
    y: &DVector<f64>,
    theta: &DenseMatrix,
    lambda: f64,
) -> Result<f64> {
    let g = -smooth_gradient(op, y, theta);
    let f = svd(theta)?;
    let r = numerical_rank(f.s.as_slice());
    if r == 0 {
        return Ok((operator_norm(&g)? - lambda).max(0.0));
    }
    let u = f.u.columns(0, r).into_owned();
    let v = f.v.columns(0, r).into_owned();
    let ut_g = u.transpose() * &g;
    let g_v = &g * &v;
    let core = &ut_g * &v;
    let align = operator_norm(&(core - DenseMatrix::identity(r, r) * lambda))?;
    let right_cross = &ut_g - (&ut_g * &v) * v.transpose();
    let left_cross = &g_v - &u * (u.transpose() * &g_v);
    let perp = {
        let left = &g - &u * &ut_g;
        &left - (&left * &v) * v.transpose()
    };
    let excess = (operator_norm(&perp)? - lambda).max(0.0);
    Ok(align
        .max(operator_norm(&right_cross)?)
        .max(operator_norm(&left_cross)?)
        .max(excess))
}

pub fn solve(obs: &ObservationSet, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_problem(&obs.operator, &obs.y, cfg, None)
}

pub fn solve_warm(
    obs: &ObservationSet,
    cfg: &SolverConfig,
    warm_start: &DenseMatrix,
) -> Result<SolveResult> {
    solve_problem(&obs.operator, &obs.y, cfg, Some(warm_start))
}

/// Solves for an arbitrary operator / response pair.
pub fn solve_problem(
    op: &dyn LinearMatrixOperator,
    y: &DVector<f64>,
    cfg: &SolverConfig,
    warm_start: Option<&DenseMatrix>,
) -> Result<SolveResult> {
    cfg.validate()?;
    check_problem(op, y)?;
    let shape = op.shape();
    if let Some(w) = warm_start {
        if w.shape() != (shape.k, shape.p) {
            return Err(Error::Dimension("warm start has the wrong shape".into()));
        }
    }
    let step = step_size(op, cfg);
    let n_obs = shape.n_obs as f64;
    match op.right_gram() {
        Some(gram) => {
            let smooth = Gram {
                gram,
                adj_y: op.adjoint(y),
                y_sq: y.norm_squared(),
                n_obs,
            };
            iterate(&smooth, (shape.k, shape.p), cfg, step, warm_start)
        }
        None => {
            let smooth = Direct { op, y, n_obs };
            iterate(&smooth, (shape.k, shape.p), cfg, step, warm_start)
        }
    }
}

fn iterate<S: Smooth>(
    smooth: &S,
    (k, p): (usize, usize),
    cfg: &SolverConfig,
    step: f64,
    warm_start: Option<&DenseMatrix>,
) -> Result<SolveResult> {
    let lambda = cfg.lambda;
    let tau = step * lambda;

    let mut x = warm_start
        .cloned()
        .unwrap_or_else(|| DenseMatrix::zeros(k, p));
    let mut x_img = smooth.image(&x);
    let mut fx = smooth.value(&x, &x_img) + lambda * nuclear_norm(&x)?;
    if !fx.is_finite() {
        return Err(Error::Diverged(0));
    }
    let mut rank = numerical_rank(crate::matcore::singular_values(&x)?.as_slice());
    let mut trace = vec![fx];
    let mut y = x.clone();
    let mut y_img = x_img.clone();
    let mut momentum = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iters {
        iterations = it;
        let grad = smooth.gradient(&y_img);
        let mut z = svt_parts(&(&y - grad * step), tau)?;
        let mut z_img = smooth.image(&z.matrix);
        let mut fz = smooth.value(&z.matrix, &z_img) + lambda * z.nuclear_norm();

        if cfg.acceleration && !(fz <= fx) {
            momentum = 1.0;
            let grad = smooth.gradient(&x_img);
            z = svt_parts(&(&x - grad * step), tau)?;
            z_img = smooth.image(&z.matrix);
            fz = smooth.value(&z.matrix, &z_img) + lambda * z.nuclear_norm();
        }
        if !fz.is_finite() {
            return Err(Error::Diverged(it));
        }
        let change = (fx - fz).abs() / fx.abs().max(f64::MIN_POSITIVE);

        if cfg.acceleration {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next;
            y = &z.matrix + (&z.matrix - &x) * beta;
            y_img = smooth.lincomb(&z_img, 1.0 + beta, &x_img, -beta);
            momentum = next;
        } else {
            y = z.matrix.clone();
            y_img = z_img.clone();
        }
        rank = z.rank();
        x = z.matrix;
        x_img = z_img;
        fx = fz;
        trace.push(fx);
        if change < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    let grad = smooth.gradient(&x_img);
    let optimality_residual = (operator_norm(&grad)? - lambda).max(0.0);
    Ok(SolveResult {
        theta_hat: x,
        objective_trace: trace,
        iterations,
        optimality_residual,
        converged,
        rank,
        step,
    })
}

/// Geometric continuation schedule for the noiseless problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSchedule {
    /// Starting weight; `None` means `‖(1/N) 𝔛*(y)‖_op / 2`.
    pub lambda0: Option<f64>,
    pub decay: f64,
    pub stages: usize,
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self {
            lambda0: None,
            decay: 0.5,
            stages: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiselessResult {
    /// Result of the last stage; `iterations` counts all stages.
    pub result: SolveResult,
    pub lambda_final: f64,
    /// `‖𝔛(Θ̂) − y‖₂ / ‖y‖₂`
    pub data_fit_residual: f64,
}

/// Approaches `min ‖Θ‖₁ s.t. 𝔛(Θ) = y` by solving the penalized problem
/// along `λ₀, ηλ₀, η²λ₀, …`, warm-starting each stage from the last.
pub fn solve_noiseless(
    obs: &ObservationSet,
    schedule: &ContinuationSchedule,
    base: &SolverConfig,
) -> Result<NoiselessResult> {
    if obs.noise_level != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noiseless continuation needs noise level 0, got {}",
            obs.noise_level
        )));
    }
    if !(schedule.decay > 0.0 && schedule.decay < 1.0) || schedule.stages == 0 {
        return Err(Error::InvalidParameter(
            "continuation needs decay in (0, 1) and at least one stage".into(),
        ));
    }
    let op = &obs.operator;
    let shape = op.shape();
    let n_obs = shape.n_obs as f64;
    let lambda0 = match schedule.lambda0 {
        Some(l) => l,
        None => operator_norm(&(op.adjoint(&obs.y) / n_obs))? / 2.0,
    };
    if !(lambda0 >= 0.0) || !lambda0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "invalid starting lambda {lambda0}"
        )));
    }

    let mut cfg = base.clone();
    cfg.step = StepSize::Fixed(step_size(op, base));
    let mut warm = DenseMatrix::zeros(shape.k, shape.p);
    let mut lambda = lambda0;
    let mut total_iters = 0;
    let mut last = None;
    for stage in 0..schedule.stages {
        if stage > 0 {
            lambda *= schedule.decay;
        }
        cfg.lambda = lambda;
        let res = solve_problem(op, &obs.y, &cfg, Some(&warm))?;
        total_iters += res.iterations;
        warm = res.theta_hat.clone();
        last = Some(res);
    }
    let mut result = last.expect("at least one stage");
    result.iterations = total_iters;
    let y_norm = obs.y.norm();
    let fit = (op.apply(&result.theta_hat) - &obs.y).norm();
    let data_fit_residual = if y_norm > 0.0 { fit / y_norm } else { fit };
    Ok(NoiselessResult {
        result,
        lambda_final: lambda,
        data_fit_residual,
    })
}

/// `‖Θ̂ − Θ*‖_F / ‖Θ*‖_F` (absolute error when `Θ* = 0`).
pub fn relative_error(theta_hat: &DenseMatrix, theta_star: &DenseMatrix) -> f64 {
    let err = frobenius_norm(&(theta_hat - theta_star));
    let base = frobenius_norm(theta_star);
    if base > 0.0 {
        err / base
    } else {
        err
    }
}

//! Experiment configuration and its flat TOML file form.
//!
//! ```toml
//! model = "multivar"          # multivar | var | compressed
//! p_list = [40, 80, 160]
//! k = 40                      # omit for square problems (k = p)
//! r = 10
//! nu = 1.0
//! gamma = 0.5                 # VAR only
//! sigma_diag = [4.0, 1.0]     # regression covariance diagonal, padded with 1.0; omit for identity
//! rescaled_grid = [2, 3, 4, 5, 6, 8, 10]
//! trials = 20
//! seed = 0
//! lambda_rule = "corollary"   # corollary | generic | manual
//! lambda_value = 0.1          # manual only, on the solver's scale
//! generic_draws = 20
//! signal_scale = 10.0
//! max_iters = 5000
//! rel_tol = 1e-9
//! acceleration = true
//! output = "results/run.csv"  # the plot goes next to it with extension .svg
//! allow_large = false         # compressed sensing beyond p = 40
//! record_runtime = false
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;
use crate::models::ModelKind;
use crate::solver::SolverConfig;

pub const DEFAULT_RESCALED_GRID: [f64; 7] = [2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0];
pub const DEFAULT_TRIALS: usize = 20;
/// Largest compressed-sensing dimension run without `allow_large`.
pub const COMPRESSED_P_LIMIT: usize = 40;
pub const DEFAULT_SIGNAL_SCALE: f64 = 10.0;
pub const DEFAULT_GENERIC_DRAWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KRule {
    Square,
    Fixed(usize),
}

impl KRule {
    pub fn k_for(self, p: usize) -> usize {
        match self {
            KRule::Square => p,
            KRule::Fixed(k) => k,
        }
    }
}

/// Covariance of the regression covariates.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSpec {
    Identity,
    /// Leading diagonal entries; the rest are 1.
    Diagonal(Vec<f64>),
}

impl SigmaSpec {
    pub fn matrix(&self, p: usize) -> DenseMatrix {
        let mut m = DenseMatrix::identity(p, p);
        if let SigmaSpec::Diagonal(d) = self {
            for (i, &v) in d.iter().take(p).enumerate() {
                m[(i, i)] = v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRuleSpec {
    /// The closed form established for the model.
    Corollary,
    /// Monte-Carlo adjoint-noise rule with this many draws.
    Generic { draws: usize },
    /// Fixed weight on the solver's scale.
    Manual(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub p_list: Vec<usize>,
    pub k_rule: KRule,
    pub r: usize,
    pub nu: f64,
    pub gamma: f64,
    pub sigma: SigmaSpec,
    /// Values of `t = N / (r p)`.
    pub rescaled_grid: Vec<f64>,
    pub trials_per_point: usize,
    pub master_seed: u64,
    pub lambda_rule: LambdaRuleSpec,
    /// Iteration controls; the weight is set per trial.
    pub solver: SolverConfig,
    pub signal_scale: f64,
    pub output_path: Option<PathBuf>,
    pub allow_large: bool,
    /// When false, `runtime_ms` is written as 0 so outputs are reproducible
    /// byte for byte.
    pub record_runtime: bool,
}

impl ExperimentConfig {
    pub fn new(model: ModelKind, p_list: Vec<usize>, r: usize) -> Self {
        Self {
            model,
            p_list,
            k_rule: KRule::Square,
            r,
            nu: 1.0,
            gamma: 0.5,
            sigma: SigmaSpec::Identity,
            rescaled_grid: DEFAULT_RESCALED_GRID.to_vec(),
            trials_per_point: DEFAULT_TRIALS,
            master_seed: 0,
            lambda_rule: LambdaRuleSpec::Corollary,
            solver: SolverConfig::new(0.0),
            signal_scale: DEFAULT_SIGNAL_SCALE,
            output_path: None,
            allow_large: false,
            record_runtime: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !matches!(
            self.model,
            ModelKind::Multivar | ModelKind::Var | ModelKind::Compressed
        ) {
            return bad(format!(
                "experiments support multivar, var and compressed, not {}",
                self.model
            ));
        }
        if self.p_list.is_empty() || self.p_list.contains(&0) {
            return bad("p_list must be nonempty and positive".into());
        }
        if self.r == 0 {
            return bad("r must be >= 1".into());
        }
        if self.model == ModelKind::Var && self.k_rule != KRule::Square {
            return bad("VAR problems are square; drop k".into());
        }
        for &p in &self.p_list {
            let k = self.k_rule.k_for(p);
            if k == 0 || self.r > k.min(p) {
                return bad(format!("r = {} exceeds min(k, p) = {}", self.r, k.min(p)));
            }
            if self.model == ModelKind::Compressed
                && p.max(k) > COMPRESSED_P_LIMIT
                && !self.allow_large
            {
                return bad(format!(
                    "compressed sensing above p = {COMPRESSED_P_LIMIT} needs allow_large"
                ));
            }
        }
        if self.rescaled_grid.is_empty()
            || self
                .rescaled_grid
                .iter()
                .any(|&t| !(t >= 1.0) || !t.is_finite())
            || self.rescaled_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("rescaled_grid must be strictly increasing with entries >= 1".into());
        }
        if self.trials_per_point == 0 {
            return bad("trials must be >= 1".into());
        }
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return bad(format!("nu must be >= 0, got {}", self.nu));
        }
        if self.nu == 0.0 && self.lambda_rule == LambdaRuleSpec::Corollary {
            return bad("the corollary rules need nu > 0".into());
        }
        if self.model == ModelKind::Var && !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if let SigmaSpec::Diagonal(d) = &self.sigma {
            if d.iter().any(|&v| !(v > 0.0)) {
                return bad("sigma_diag entries must be positive".into());
            }
        }
        match self.lambda_rule {
            LambdaRuleSpec::Generic { draws } if draws < crate::regsel::MIN_NOISE_DRAWS => {
                return bad(format!(
                    "generic_draws must be >= {}",
                    crate::regsel::MIN_NOISE_DRAWS
                ));
            }
            LambdaRuleSpec::Manual(v) if !(v > 0.0) => {
                return bad("lambda_value must be positive".into());
            }
            _ => {}
        }
        if !(self.signal_scale > 0.0) {
            return bad("signal_scale must be positive".into());
        }
        let mut solver = self.solver.clone();
        solver.lambda = 0.0;
        solver.validate()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.into_config()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Where the plot goes: the CSV path with extension `.svg`.
    pub fn plot_path(&self) -> Option<PathBuf> {
        self.output_path.as_ref().map(|p| p.with_extension("svg"))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model: String,
    p_list: Vec<usize>,
    k: Option<usize>,
    r: usize,
    nu: Option<f64>,
    gamma: Option<f64>,
    sigma_diag: Option<Vec<f64>>,
    rescaled_grid: Option<Vec<f64>>,
    trials: Option<usize>,
    seed: Option<u64>,
    lambda_rule: Option<String>,
    lambda_value: Option<f64>,
    generic_draws: Option<usize>,
    signal_scale: Option<f64>,
    max_iters: Option<usize>,
    rel_tol: Option<f64>,
    acceleration: Option<bool>,
    output: Option<PathBuf>,
    allow_large: Option<bool>,
    record_runtime: Option<bool>,
}

impl ConfigFile {
    fn into_config(self) -> Result<ExperimentConfig> {
        let model: ModelKind = self.model.parse()?;
        let mut cfg = ExperimentConfig::new(model, self.p_list, self.r);
        if let Some(k) = self.k {
            cfg.k_rule = KRule::Fixed(k);
        }
        if let Some(v) = self.nu {
            cfg.nu = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(d) = self.sigma_diag {
            cfg.sigma = SigmaSpec::Diagonal(d);
        }
        if let Some(g) = self.rescaled_grid {
            cfg.rescaled_grid = g;
        }
        if let Some(v) = self.trials {
            cfg.trials_per_point = v;
        }
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        let draws = self.generic_draws.unwrap_or(DEFAULT_GENERIC_DRAWS);
        cfg.lambda_rule = match (
            self.lambda_rule.as_deref().unwrap_or("corollary"),
            self.lambda_value,
        ) {
            ("corollary", None) => LambdaRuleSpec::Corollary,
            ("generic", None) => LambdaRuleSpec::Generic { draws },
            ("manual", Some(v)) => LambdaRuleSpec::Manual(v),
            ("manual", None) => {
                return Err(Error::Config(
                    "lambda_rule = \"manual\" needs lambda_value".into(),
                ))
            }
            (rule @ ("corollary" | "generic"), Some(_)) => {
                return Err(Error::Config(format!(
                    "lambda_value is only used with the manual rule, not {rule}"
                )))
            }
            (other, _) => return Err(Error::Config(format!("unknown lambda_rule {other:?}"))),
        };
        if let Some(v) = self.signal_scale {
            cfg.signal_scale = v;
        }
        if let Some(v) = self.max_iters {
            cfg.solver.max_iters = v;
        }
        if let Some(v) = self.rel_tol {
            cfg.solver.rel_tol = v;
        }
        if let Some(v) = self.acceleration {
            cfg.solver.acceleration = v;
        }
        cfg.output_path = self.output;
        cfg.allow_large = self.allow_large.unwrap_or(false);
        cfg.record_runtime = self.record_runtime.unwrap_or(false);
        cfg.validate()?;
        Ok(cfg)
    }
}

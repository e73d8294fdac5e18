//! Sample-size sweeps: for each dimension `p`, rescaled size `t = N/(r p)`
//! and trial, draw a problem, pick `λ`, solve, and record the error.
//!
//! For the regression and autoregressive models `N` counts vector samples
//! (rows of the design), which is the sample size their error rates are
//! stated in; for compressed sensing it counts scalar observations.

mod config;
mod output;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    ExperimentConfig, KRule, LambdaRuleSpec, SigmaSpec, COMPRESSED_P_LIMIT, DEFAULT_GENERIC_DRAWS,
    DEFAULT_RESCALED_GRID, DEFAULT_SIGNAL_SCALE, DEFAULT_TRIALS,
};
pub use output::{emit_csv, emit_plot, read_csv, CSV_HEADER};

use crate::analysis::{empirical_vs_bound, KappaRule};
use crate::error::{Error, Result};
use crate::matcore::{frobenius_norm, nuclear_norm, operator_norm};
use crate::models::{
    generate_exact_lowrank, sample_compressed, sample_multivar, sample_var, ModelKind,
    ObservationSet, VarParams,
};
use crate::regsel::{lambda_compressed, lambda_generic, lambda_multivar, lambda_var, LambdaChoice};
use crate::rng::{mix_seed, stream};
use crate::solver::{relative_error, solve};

/// One solved trial. Failed trials keep their coordinates, carry NaN in the
/// metric fields and the reason in `failure` (not part of the CSV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub model: String,
    pub p: usize,
    pub k: usize,
    pub r: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "rescaled_N")]
    pub rescaled_n: f64,
    pub trial: usize,
    pub seed: u64,
    /// Weight in per-sample form: the solver's weight times the scalar
    /// observations per sample (`k` regression, `p` VAR, 1 compressed).
    pub lambda: f64,
    pub frob_error: f64,
    pub relative_error: f64,
    pub nuclear_error: f64,
    pub iterations: usize,
    pub runtime_ms: f64,
    pub bound_value: f64,
    pub bound_ratio: f64,
    #[serde(skip)]
    pub failure: Option<String>,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// Seed of trial `trial` at grid index `t_index` for dimension `p`.
pub fn trial_seed(master: u64, model: ModelKind, p: usize, t_index: usize, trial: usize) -> u64 {
    mix_seed(&[
        master,
        model.code() as u64,
        p as u64,
        t_index as u64,
        trial as u64,
    ])
}

/// Sample size for rescaled value `t`: `round(t r p)`, at least 1.
pub fn sample_size(t: f64, r: usize, p: usize) -> usize {
    ((t * (r * p) as f64).round() as usize).max(1)
}

struct Point {
    p: usize,
    t_index: usize,
    t: f64,
    trial: usize,
}

/// Runs the sweep on the current rayon pool. Records come back ordered by
/// `(p, t, trial)` and do not depend on the number of threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let mut points = Vec::new();
    for &p in &cfg.p_list {
        for (t_index, &t) in cfg.rescaled_grid.iter().enumerate() {
            for trial in 0..cfg.trials_per_point {
                points.push(Point {
                    p,
                    t_index,
                    t,
                    trial,
                });
            }
        }
    }
    let mut records: Vec<TrialRecord> = points.par_iter().map(|pt| run_point(cfg, pt)).collect();
    records.sort_by_key(|r| (r.p, r.n, r.trial));
    Ok(records)
}

pub type WorkerPool = rayon::ThreadPool;

/// A bounded pool of `workers` threads (at least one).
pub fn worker_pool(workers: usize) -> Result<WorkerPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// [`run_experiment`] on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<Vec<TrialRecord>> {
    worker_pool(workers)?.install(|| run_experiment(cfg))
}

fn run_point(cfg: &ExperimentConfig, pt: &Point) -> TrialRecord {
    let k = cfg.k_rule.k_for(pt.p);
    let n = sample_size(pt.t, cfg.r, pt.p);
    let seed = trial_seed(cfg.master_seed, cfg.model, pt.p, pt.t_index, pt.trial);
    let mut rec = TrialRecord {
        model: cfg.model.tag().to_string(),
        p: pt.p,
        k,
        r: cfg.r,
        n,
        rescaled_n: n as f64 / (cfg.r * pt.p) as f64,
        trial: pt.trial,
        seed,
        lambda: f64::NAN,
        frob_error: f64::NAN,
        relative_error: f64::NAN,
        nuclear_error: f64::NAN,
        iterations: 0,
        runtime_ms: 0.0,
        bound_value: f64::NAN,
        bound_ratio: f64::NAN,
        failure: None,
    };
    if let Err(e) = solve_trial(cfg, k, pt.p, n, seed, &mut rec) {
        rec.failure = Some(e.to_string());
    }
    rec
}

struct Problem {
    truth: crate::models::GroundTruth,
    obs: ObservationSet,
    choice: LambdaChoice,
    kappa: KappaRule,
    obs_per_sample: usize,
}

fn build_problem(
    cfg: &ExperimentConfig,
    k: usize,
    p: usize,
    n: usize,
    seed: u64,
) -> Result<Problem> {
    let truth_seed = mix_seed(&[seed, stream::TRUTH]);
    let data_seed = mix_seed(&[seed, stream::DESIGN]);
    let (truth, obs, corollary, kappa, obs_per_sample) = match cfg.model {
        ModelKind::Multivar => {
            let truth = generate_exact_lowrank(k, p, cfg.r, cfg.signal_scale, truth_seed)?;
            let sigma = cfg.sigma.matrix(p);
            let eig = sigma.clone().symmetric_eigen().eigenvalues;
            let sig_max = eig.max();
            let sig_min = eig.min();
            let obs = sample_multivar(&truth, n, &sigma, cfg.nu, data_seed)?;
            let rule = if cfg.lambda_rule == LambdaRuleSpec::Corollary {
                Some(lambda_multivar(cfg.nu, sig_max, k, p, n)?)
            } else {
                None
            };
            (
                truth,
                obs,
                rule,
                KappaRule::Multivar { sigma_min: sig_min },
                k,
            )
        }
        ModelKind::Var => {
            let truth = generate_exact_lowrank(p, p, cfg.r, cfg.gamma, truth_seed)?;
            let params = VarParams::new(truth.theta_star.clone(), cfg.nu, n, cfg.gamma)?;
            let sig_min = params.sigma.clone().symmetric_eigen().eigenvalues.min();
            let rule = if cfg.lambda_rule == LambdaRuleSpec::Corollary {
                Some(lambda_var(operator_norm(&params.sigma)?, cfg.gamma, p, n)?)
            } else {
                None
            };
            let obs = sample_var(&params, data_seed)?;
            (truth, obs, rule, KappaRule::Var { sigma_min: sig_min }, p)
        }
        ModelKind::Compressed => {
            let truth = generate_exact_lowrank(k, p, cfg.r, cfg.signal_scale, truth_seed)?;
            let obs = sample_compressed(&truth, n, cfg.nu, data_seed)?;
            let rule = if cfg.lambda_rule == LambdaRuleSpec::Corollary {
                Some(lambda_compressed(cfg.nu, k, p, n)?)
            } else {
                None
            };
            (truth, obs, rule, KappaRule::Compressed, 1)
        }
        ModelKind::Identity => {
            return Err(Error::Config(
                "identity model has no sample size to sweep".into(),
            ))
        }
    };
    let choice = match cfg.lambda_rule {
        LambdaRuleSpec::Corollary => corollary.expect("set above"),
        LambdaRuleSpec::Generic { draws } => {
            lambda_generic(&obs, draws, mix_seed(&[seed, stream::LAMBDA]))?
        }
        LambdaRuleSpec::Manual(v) => LambdaChoice::manual(v)?,
    };
    Ok(Problem {
        truth,
        obs,
        choice,
        kappa,
        obs_per_sample,
    })
}

fn solve_trial(
    cfg: &ExperimentConfig,
    k: usize,
    p: usize,
    n: usize,
    seed: u64,
    rec: &mut TrialRecord,
) -> Result<()> {
    let prob = build_problem(cfg, k, p, n, seed)?;
    let mut solver_cfg = cfg.solver.clone();
    solver_cfg.lambda = prob.choice.solver_weight();
    let lambda = solver_cfg.lambda * prob.obs_per_sample as f64;
    rec.lambda = lambda;

    let start = Instant::now();
    let res = solve(&prob.obs, &solver_cfg)?;
    if cfg.record_runtime {
        rec.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    let diff = &res.theta_hat - &prob.truth.theta_star;
    rec.frob_error = frobenius_norm(&diff);
    rec.relative_error = relative_error(&res.theta_hat, &prob.truth.theta_star);
    rec.nuclear_error = nuclear_norm(&diff)?;
    rec.iterations = res.iterations;
    let bound = empirical_vs_bound(&res.theta_hat, &prob.truth, lambda, prob.kappa)?;
    rec.bound_value = bound.bound;
    rec.bound_ratio = bound.ratio;
    Ok(())
}

/// Mean of `frob_error` over successful records at each `p` whose rescaled
/// size is within 1% of `t`, as `(p, mean)` pairs in increasing `p`.
pub fn mean_errors_at(records: &[TrialRecord], t: f64) -> Vec<(usize, f64)> {
    let mut by_p: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for rec in records
        .iter()
        .filter(|r| r.is_ok() && (r.rescaled_n - t).abs() <= 0.01 * t)
    {
        let e = by_p.entry(rec.p).or_insert((0.0, 0));
        e.0 += rec.frob_error;
        e.1 += 1;
    }
    by_p.into_iter()
        .map(|(p, (s, c))| (p, s / c as f64))
        .collect()
}

/// `(max_p m_p − min_p m_p) / mean_p m_p` over the per-`p` mean errors at `t`.
pub fn collapse_metric(records: &[TrialRecord], t: f64) -> Result<f64> {
    let means = mean_errors_at(records, t);
    if means.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "collapse needs at least two dimensions at t = {t}, found {}",
            means.len()
        )));
    }
    let vals: Vec<f64> = means.iter().map(|&(_, m)| m).collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let avg = vals.iter().sum::<f64>() / vals.len() as f64;
    Ok((max - min) / avg)
}

/// Least-squares slope of `ln(mean frob_error)` against `ln N` over the
/// successful records with dimension `p`.
pub fn error_slope(records: &[TrialRecord], p: usize) -> Result<f64> {
    let mut by_n: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for rec in records.iter().filter(|r| r.is_ok() && r.p == p) {
        let e = by_n.entry(rec.n).or_insert((0.0, 0));
        e.0 += rec.frob_error;
        e.1 += 1;
    }
    if by_n.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need two sample sizes at p = {p}"
        )));
    }
    let pts: Vec<(f64, f64)> = by_n
        .into_iter()
        .map(|(n, (s, c))| ((n as f64).ln(), (s / c as f64).ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|q| q.0).sum::<f64>() / m;
    let my = pts.iter().map(|q| q.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|q| (q.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(p: usize, t: f64, err: f64) -> TrialRecord {
        TrialRecord {
            model: "multivar".into(),
            p,
            k: p,
            r: 1,
            n: (t * p as f64) as usize,
            rescaled_n: t,
            trial: 0,
            seed: 0,
            lambda: 1.0,
            frob_error: err,
            relative_error: err,
            nuclear_error: err,
            iterations: 1,
            runtime_ms: 0.0,
            bound_value: 1.0,
            bound_ratio: err,
            failure: None,
        }
    }

    #[test]
    fn collapse_arithmetic() {
        let same = vec![record(10, 2.0, 0.5), record(20, 2.0, 0.5)];
        assert_eq!(collapse_metric(&same, 2.0).unwrap(), 0.0);
        let recs = vec![
            record(10, 2.0, 1.0),
            record(20, 2.0, 1.2),
            record(20, 3.0, 9.0),
        ];
        assert!((collapse_metric(&recs, 2.0).unwrap() - 0.2 / 1.1).abs() < 1e-12);
        assert!(collapse_metric(&recs, 3.0).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let recs: Vec<TrialRecord> = [2.0, 4.0, 8.0]
            .iter()
            .map(|&t| record(10, t, 1.0 / (t * 10.0f64).sqrt()))
            .collect();
        assert!((error_slope(&recs, 10).unwrap() + 0.5).abs() < 1e-3);
    }

    #[test]
    fn seeds_differ_by_coordinate() {
        let base = trial_seed(1, ModelKind::Multivar, 40, 0, 0);
        assert_ne!(base, trial_seed(2, ModelKind::Multivar, 40, 0, 0));
        assert_ne!(base, trial_seed(1, ModelKind::Var, 40, 0, 0));
        assert_ne!(base, trial_seed(1, ModelKind::Multivar, 80, 0, 0));
        assert_ne!(base, trial_seed(1, ModelKind::Multivar, 40, 1, 0));
        assert_ne!(base, trial_seed(1, ModelKind::Multivar, 40, 0, 1));
    }

    #[test]
    fn single_point_single_record() {
        let mut cfg = ExperimentConfig::new(ModelKind::Compressed, vec![6], 1);
        cfg.rescaled_grid = vec![8.0];
        cfg.trials_per_point = 1;
        let recs = run_experiment(&cfg).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].is_ok(), "{:?}", recs[0].failure);
        assert_eq!(recs[0].n, 48);
        assert_eq!(recs[0].rescaled_n, 8.0);
    }

    #[test]
    fn failures_become_rows() {
        let mut cfg = ExperimentConfig::new(ModelKind::Compressed, vec![6], 1);
        cfg.rescaled_grid = vec![2.0];
        cfg.trials_per_point = 2;
        cfg.solver.max_iters = 1000;
        cfg.solver.step = crate::solver::StepSize::Fixed(1e6);
        cfg.solver.acceleration = false;
        let recs = run_experiment(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| !r.is_ok() && r.frob_error.is_nan()));
    }
}

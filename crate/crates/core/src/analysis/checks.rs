//! Monte-Carlo frequency checks of the restricted-curvature and
//! concentration inequalities.
//!
//! Each check runs independent trials (in parallel, on per-trial seed
//! streams), records a few statistics per trial and whether the event held,
//! and reports the empirical rate next to the theoretical floor when one is
//! known explicitly.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matcore::{nuclear_norm, operator_norm, DenseMatrix};
use crate::models::{
    gaussian_rows, haar_orthonormal, sample_var, symmetric_sqrt, LinearMatrixOperator, VarParams,
};
use crate::rng::{gaussian_matrix, mix_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    MultivarLemma2,
    VarLemma4,
    CompressedProp1,
    MetaLemma8,
}

impl CheckKind {
    pub fn tag(self) -> &'static str {
        match self {
            CheckKind::MultivarLemma2 => "MultivarLemma2",
            CheckKind::VarLemma4 => "VarLemma4",
            CheckKind::CompressedProp1 => "CompressedProp1",
            CheckKind::MetaLemma8 => "MetaLemma8",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RscReport {
    pub kind: CheckKind,
    pub trials: usize,
    pub pass_rate: f64,
    /// Theoretical lower bound on the pass probability, when explicit.
    pub floor: Option<f64>,
    /// Names of the per-trial statistics.
    pub columns: Vec<&'static str>,
    /// One row per trial, aligned with `columns`.
    pub statistics: Vec<Vec<f64>>,
    pub passed: Vec<bool>,
    pub note: Option<&'static str>,
}

impl RscReport {
    fn from_rows(
        kind: CheckKind,
        columns: Vec<&'static str>,
        rows: Vec<(bool, Vec<f64>)>,
        floor: Option<f64>,
    ) -> Self {
        let trials = rows.len();
        let (passed, statistics): (Vec<bool>, Vec<Vec<f64>>) = rows.into_iter().unzip();
        let hits = passed.iter().filter(|&&b| b).count();
        let pass_rate = if trials == 0 {
            0.0
        } else {
            hits as f64 / trials as f64
        };
        Self {
            kind,
            trials,
            pass_rate,
            floor,
            columns,
            statistics,
            passed,
            note: None,
        }
    }

    /// Binomial standard error at the floor, `√(f(1−f)/trials)`.
    pub fn floor_standard_error(&self) -> Option<f64> {
        self.floor
            .map(|f| (f * (1.0 - f) / self.trials.max(1) as f64).sqrt())
    }

    /// `pass_rate ≥ floor − 3·SE`, or `None` without an explicit floor.
    pub fn meets_floor(&self) -> Option<bool> {
        let f = self.floor?;
        Some(self.pass_rate >= f - 3.0 * self.floor_standard_error()?)
    }

    /// Mean of a named statistic over trials.
    pub fn mean(&self, column: &str) -> Option<f64> {
        let j = self.columns.iter().position(|c| *c == column)?;
        let sum: f64 = self.statistics.iter().map(|row| row[j]).sum();
        Some(sum / self.trials.max(1) as f64)
    }

    pub fn column(&self, column: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| *c == column)?;
        Some(self.statistics.iter().map(|row| row[j]).collect())
    }

    /// One row per trial: `trial,passed,<statistics…>`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["trial".to_string(), "passed".to_string()];
        header.extend(self.columns.iter().map(|c| c.to_string()));
        w.write_record(&header)?;
        for (i, (row, ok)) in self.statistics.iter().zip(&self.passed).enumerate() {
            let mut rec = vec![i.to_string(), ok.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "check: {}", self.kind.tag());
        let _ = writeln!(s, "trials: {}", self.trials);
        let _ = writeln!(s, "pass_rate: {:.6}", self.pass_rate);
        match self.floor {
            Some(f) => {
                let _ = writeln!(s, "floor: {f:.6}");
                let _ = writeln!(s, "meets_floor: {}", self.meets_floor().unwrap_or(false));
            }
            None => {
                let _ = writeln!(s, "floor: none");
            }
        }
        for c in &self.columns {
            let _ = writeln!(s, "mean_{c}: {:.6}", self.mean(c).unwrap_or(f64::NAN));
        }
        if let Some(note) = self.note {
            let _ = writeln!(s, "note: {note}");
        }
        s
    }
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    mix_seed(&[seed, trial as u64])
}

fn extreme_eigenvalues(sym: &DenseMatrix) -> (f64, f64) {
    let eig = sym.clone().symmetric_eigen();
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Rows of `X` i.i.d. `N(0, Σ)`; event: `σ_min(XᵀX/n) ≥ σ_min(Σ)/9` and
/// `σ_max(XᵀX/n) ≤ 9 σ_max(Σ)`. Floor `1 − 4 exp(−n/2)`.
pub fn check_wishart_spectrum(
    p: usize,
    n: usize,
    sigma: &DenseMatrix,
    trials: usize,
    seed: u64,
) -> Result<RscReport> {
    if p == 0 || n < p {
        return Err(Error::InvalidParameter(format!(
            "need n >= p >= 1, got n={n}, p={p}"
        )));
    }
    if sigma.shape() != (p, p) {
        return Err(Error::Dimension(format!("covariance must be {p}x{p}")));
    }
    let sqrt = symmetric_sqrt(sigma)?;
    let (sig_min, sig_max) = extreme_eigenvalues(sigma);
    let rows = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(trial_seed(seed, t));
            let x = gaussian_rows(n, &sqrt, &mut rng);
            let (lo, hi) = extreme_eigenvalues(&(x.tr_mul(&x) / n as f64));
            let ok = lo >= sig_min / 9.0 && hi <= 9.0 * sig_max;
            (ok, vec![lo, hi])
        })
        .collect();
    let floor = 1.0 - 4.0 * (-(n as f64) / 2.0).exp();
    Ok(RscReport::from_rows(
        CheckKind::MultivarLemma2,
        vec!["eig_min", "eig_max"],
        rows,
        Some(floor),
    ))
}

/// Stationary VAR design with `γ = ‖Θ*‖_op`; event:
/// `σ_min(XᵀX/n) ≥ σ_min(Σ)/4` and `σ_max(XᵀX/n) ≤ 24 σ_max(Σ)/(1−γ)`.
/// The probability constants are not explicit, so no floor is reported.
pub fn check_var_spectrum(
    theta_star: &DenseMatrix,
    nu: f64,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<RscReport> {
    let gamma = operator_norm(theta_star)?;
    if gamma >= 1.0 {
        return Err(Error::Unstable(gamma));
    }
    let params = VarParams::new(theta_star.clone(), nu, n, gamma)?;
    let (sig_min, sig_max) = extreme_eigenvalues(&params.sigma);
    let rows = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, Vec<f64>)> {
            let obs = sample_var(&params, trial_seed(seed, t))?;
            let gram = obs
                .operator
                .right_gram()
                .expect("VAR sets use a design operator");
            let (lo, hi) = extreme_eigenvalues(&(gram / n as f64));
            let ok = lo >= sig_min / 4.0 && hi <= 24.0 * sig_max / (1.0 - gamma);
            Ok((ok, vec![lo, hi, lo / sig_min, hi / sig_max]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RscReport::from_rows(
        CheckKind::VarLemma4,
        vec![
            "eig_min",
            "eig_max",
            "eig_min_over_sigma_min",
            "eig_max_over_sigma_max",
        ],
        rows,
        None,
    ))
}

/// Unit-Frobenius test matrix number `j` of `m`: ranks sweep from 1 to
/// `min(k, p)`, every third one is a mixture of a dominant rank-one part and
/// a higher-rank part, all with Haar-random singular vectors.
fn prop1_test_matrix(k: usize, p: usize, j: usize, m: usize, rng: &mut Rng) -> DenseMatrix {
    let full = k.min(p);
    let rank = 1 + (j * (full - 1)) / (m.max(2) - 1);
    let random_rank = |r: usize, rng: &mut Rng| {
        let u = haar_orthonormal(k, r, rng);
        let v = haar_orthonormal(p, r, rng);
        let s = DVector::from_iterator(r, (0..r).map(|_| 0.1 + rng.random::<f64>()));
        u * DMatrix::from_diagonal(&s) * v.transpose()
    };
    let mut theta = random_rank(rank, rng);
    if j % 3 == 2 {
        let spike = random_rank(1, rng);
        theta = spike * (3.0 * theta.norm()) + theta;
    }
    let norm = theta.norm();
    theta / norm
}

/// Fresh `N×kp` Gaussian operator per trial; event: for every sampled `Θ`,
/// `‖𝔛(Θ)‖₂/√N ≥ ‖Θ‖_F/4 − (√(k/N) + √(p/N)) ‖Θ‖₁`.
/// Floor `1 − 2 exp(−N/32)`.
pub fn check_prop1(
    k: usize,
    p: usize,
    n_obs: usize,
    trials: usize,
    num_test_matrices: usize,
    seed: u64,
) -> Result<RscReport> {
    if k == 0 || p == 0 || n_obs == 0 {
        return Err(Error::InvalidParameter(
            "k, p and N must be positive".into(),
        ));
    }
    let n = n_obs as f64;
    let slope = (k as f64 / n).sqrt() + (p as f64 / n).sqrt();
    let rows = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, Vec<f64>)> {
            let mut rng = rng_from_seed(trial_seed(seed, t));
            let stacked = gaussian_matrix(n_obs, k * p, &mut rng);
            let tests: Vec<DenseMatrix> = (0..num_test_matrices)
                .map(|j| prop1_test_matrix(k, p, j, num_test_matrices, &mut rng))
                .collect();
            let mut vecs = DenseMatrix::zeros(k * p, num_test_matrices);
            for (j, th) in tests.iter().enumerate() {
                vecs.column_mut(j).copy_from_slice(th.as_slice());
            }
            let images = &stacked * &vecs;
            let mut min_margin = f64::INFINITY;
            let mut min_ratio = f64::INFINITY;
            for (j, th) in tests.iter().enumerate() {
                let lhs = images.column(j).norm() / n.sqrt();
                let frob = th.norm();
                let rhs = frob / 4.0 - slope * nuclear_norm(th)?;
                min_margin = min_margin.min(lhs - rhs);
                min_ratio = min_ratio.min(lhs / frob);
            }
            if num_test_matrices == 0 {
                min_margin = 0.0;
                min_ratio = f64::NAN;
            }
            Ok((min_margin >= 0.0, vec![min_margin, min_ratio]))
        })
        .collect::<Result<Vec<_>>>()?;
    let floor = 1.0 - 2.0 * (-n / 32.0).exp();
    let mut report = RscReport::from_rows(
        CheckKind::CompressedProp1,
        vec!["min_margin", "min_lhs_over_frobenius"],
        rows,
        Some(floor),
    );
    report.note = Some("inequality tested on sampled matrices only; a necessary-condition check");
    Ok(report)
}

/// `Y ~ N(0, Q)` in dimension `n`; event `|‖Y‖² − tr Q|/n ≤ 4 t ‖Q‖_op`.
/// Floor `1 − 2 exp(−n (t − 2/√n)²/2) − 2 exp(−n/2)`.
///
/// `‖Y‖²` is drawn as `Σ dᵢ gᵢ²` over the eigenvalues `dᵢ` of `Q`, which has
/// the same law.
pub fn check_meta_concentration(
    q: &DenseMatrix,
    n: usize,
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<RscReport> {
    if q.shape() != (n, n) || n == 0 {
        return Err(Error::Dimension(format!("Q must be {n}x{n}")));
    }
    let nf = n as f64;
    let min_t = 2.0 / nf.sqrt();
    if !(t > min_t) {
        return Err(Error::InvalidParameter(format!(
            "t must exceed 2/sqrt(n) = {min_t}, got {t}"
        )));
    }
    let eig = q.clone().symmetric_eigen().eigenvalues;
    let top = eig.iter().copied().fold(0.0f64, f64::max);
    if eig.iter().any(|&d| d < -1e-12 * top.max(1.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let d: Vec<f64> = eig.iter().map(|&x| x.max(0.0)).collect();
    let trace: f64 = d.iter().sum();
    let threshold = 4.0 * t * top;
    let rows = (0..trials)
        .into_par_iter()
        .map(|tr| {
            let mut rng = rng_from_seed(trial_seed(seed, tr));
            let norm_sq: f64 = d
                .iter()
                .map(|&di| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    di * g * g
                })
                .sum();
            let deviation = (norm_sq - trace).abs() / nf;
            (deviation <= threshold, vec![norm_sq / nf, deviation])
        })
        .collect();
    let floor = 1.0 - 2.0 * (-nf * (t - min_t).powi(2) / 2.0).exp() - 2.0 * (-nf / 2.0).exp();
    Ok(RscReport::from_rows(
        CheckKind::MetaLemma8,
        vec!["norm_sq_over_n", "deviation"],
        rows,
        Some(floor),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wishart_well_conditioned() {
        let r = check_wishart_spectrum(50, 200, &DenseMatrix::identity(50, 50), 100, 1).unwrap();
        assert_eq!(r.pass_rate, 1.0);
        assert_eq!(r.meets_floor(), Some(true));
        assert!(check_wishart_spectrum(50, 40, &DenseMatrix::identity(50, 50), 1, 1).is_err());
    }

    #[test]
    fn wishart_square_case_loses_the_lower_event() {
        // At n = p the smallest eigenvalue of XᵀX/n collapses toward zero,
        // so the lower event fails almost surely while the upper one holds.
        let r = check_wishart_spectrum(50, 50, &DenseMatrix::identity(50, 50), 40, 2).unwrap();
        let lows = r.column("eig_min").unwrap();
        let highs = r.column("eig_max").unwrap();
        assert!(highs.iter().all(|&h| h <= 9.0));
        assert!(lows.iter().filter(|&&l| l < 1.0 / 9.0).count() >= 36);
    }

    #[test]
    fn wishart_spiked_top_eigenvalue() {
        let (p, n) = (50, 200);
        let mut sigma = DenseMatrix::identity(p, p);
        sigma[(0, 0)] = 4.0;
        let r = check_wishart_spectrum(p, n, &sigma, 100, 3).unwrap();
        let gamma = p as f64 / n as f64;
        let spike_limit = 4.0 * (1.0 + gamma / 3.0);
        let top = r.mean("eig_max").unwrap();
        assert!(
            (top / spike_limit - 1.0).abs() <= 0.2,
            "{top} vs {spike_limit}"
        );
        assert!(top <= 4.0 * (1.0 + gamma.sqrt()).powi(2));
    }

    #[test]
    fn var_spectrum() {
        let zero = DenseMatrix::zeros(10, 10);
        assert_eq!(
            check_var_spectrum(&zero, 1.0, 200, 20, 4)
                .unwrap()
                .pass_rate,
            1.0
        );

        let mut rng = rng_from_seed(5);
        let u = haar_orthonormal(20, 20, &mut rng);
        let v = haar_orthonormal(20, 20, &mut rng);
        let theta = u * v.transpose() * 0.5;
        let r = check_var_spectrum(&theta, 1.0, 400, 100, 6).unwrap();
        assert!(r.pass_rate >= 0.95, "{}", r.pass_rate);
        assert!(r.floor.is_none());

        let short = check_var_spectrum(&theta, 1.0, 60, 20, 7).unwrap();
        let long = check_var_spectrum(&theta, 1.0, 2000, 20, 8).unwrap();
        let a = short.mean("eig_min_over_sigma_min").unwrap();
        let b = long.mean("eig_min_over_sigma_min").unwrap();
        assert!(a < b && b < 1.0, "{a} {b}");

        assert!(check_var_spectrum(&DenseMatrix::identity(3, 3), 1.0, 10, 1, 0).is_err());
    }

    #[test]
    fn prop1_small() {
        let r = check_prop1(20, 20, 3200, 4, 20, 9).unwrap();
        assert_eq!(r.pass_rate, 1.0);
        assert!(r.mean("min_lhs_over_frobenius").unwrap() > 0.8);
        let empty = check_prop1(3, 3, 10, 2, 0, 9).unwrap();
        assert_eq!(empty.pass_rate, 1.0);
    }

    #[test]
    fn prop1_rank_one_margin() {
        let slope = 2.0 * (20.0f64 / 3200.0).sqrt();
        assert!((0.25 - slope - 0.091886).abs() < 1e-5);
        let mut rng = rng_from_seed(10);
        let th = prop1_test_matrix(20, 20, 0, 10, &mut rng);
        assert_eq!(
            crate::matcore::singular_values(&th)
                .unwrap()
                .iter()
                .filter(|&&s| s > 1e-10)
                .count(),
            1
        );
        assert!((th.norm() - 1.0).abs() < 1e-12);
        let last = prop1_test_matrix(20, 20, 9, 10, &mut rng);
        assert_eq!(
            crate::matcore::numerical_rank(&crate::matcore::singular_values(&last).unwrap()),
            20
        );
    }

    #[test]
    fn meta_concentration() {
        let r = check_meta_concentration(&DenseMatrix::zeros(20, 20), 20, 0.5, 50, 11).unwrap();
        assert_eq!(r.pass_rate, 1.0);
        let r = check_meta_concentration(&DenseMatrix::identity(500, 500), 500, 0.2, 10_000, 12)
            .unwrap();
        assert!((r.mean("norm_sq_over_n").unwrap() - 1.0).abs() <= 0.02);
        assert_eq!(r.meets_floor(), Some(true));
        assert!(
            check_meta_concentration(&DenseMatrix::identity(100, 100), 100, 0.2, 1, 0).is_err()
        );
    }

    #[test]
    fn report_csv_and_summary() {
        let r = check_wishart_spectrum(5, 20, &DenseMatrix::identity(5, 5), 3, 13).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        r.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("trial,passed,eig_min,eig_max\n"));
        assert_eq!(text.lines().count(), 4);
        assert!(r.summary().contains("pass_rate: 1.000000"));
    }
}

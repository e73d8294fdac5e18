//! Ground-truth generators with Grassmann-uniform singular subspaces.

use crate::error::{Error, Result};
use crate::matcore::{DenseMatrix, SubspacePair};
use crate::rng::{gaussian_matrix, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthKind {
    ExactRank { r: usize },
    NearLowRank { q: f64, radius: f64 },
}

/// `Θ*` together with the factors and spectrum it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub theta_star: DenseMatrix,
    pub kind: TruthKind,
    /// Singular vectors in nonincreasing order of `spectrum`.
    pub factors: SubspacePair,
    pub spectrum: Vec<f64>,
}

impl GroundTruth {
    pub fn shape(&self) -> (usize, usize) {
        self.theta_star.shape()
    }

    /// Top-`r` singular subspace pair `(Uʳ, Vʳ)`.
    pub fn subspace(&self, r: usize) -> Result<SubspacePair> {
        if r == 0 || r > self.factors.rank() {
            return Err(Error::InvalidParameter(format!(
                "subspace rank {r} outside 1..={}",
                self.factors.rank()
            )));
        }
        SubspacePair::new(
            self.factors.u().columns(0, r).into_owned(),
            self.factors.v().columns(0, r).into_owned(),
        )
    }

    /// Exact rank `r`, or the number of nonzero singular values otherwise.
    pub fn rank(&self) -> usize {
        match self.kind {
            TruthKind::ExactRank { r } => r,
            TruthKind::NearLowRank { .. } => self.spectrum.iter().filter(|&&s| s > 0.0).count(),
        }
    }
}

/// Orthonormal `n×r` basis of a Haar-random `r`-dimensional subspace:
/// QR of a Gaussian matrix with the signs of `R`'s diagonal folded into `Q`.
pub fn haar_orthonormal(n: usize, r: usize, rng: &mut Rng) -> DenseMatrix {
    let g = gaussian_matrix(n, r, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let rmat = qr.r();
    for j in 0..r {
        if rmat[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn assemble(u: &DenseMatrix, spectrum: &[f64], v: &DenseMatrix) -> DenseMatrix {
    let mut us = u.clone();
    for (j, &s) in spectrum.iter().enumerate() {
        us.column_mut(j).scale_mut(s);
    }
    us * v.transpose()
}

/// Rank-`r` `Θ* = scale · U Vᵀ` with Haar-uniform `U (k×r)`, `V (p×r)`.
pub fn generate_exact_lowrank(
    k: usize,
    p: usize,
    r: usize,
    scale: f64,
    seed: u64,
) -> Result<GroundTruth> {
    if r == 0 || r > k.min(p) {
        return Err(Error::InvalidParameter(format!(
            "rank {r} outside 1..=min({k}, {p})"
        )));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scale must be > 0, got {scale}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let u = haar_orthonormal(k, r, &mut rng);
    let v = haar_orthonormal(p, r, &mut rng);
    let spectrum = vec![scale; r];
    let theta_star = assemble(&u, &spectrum, &v);
    Ok(GroundTruth {
        theta_star,
        kind: TruthKind::ExactRank { r },
        factors: SubspacePair::new(u, v)?,
        spectrum,
    })
}

/// `Θ*` in the ℓq ball with spectrum `σᵢ = c·i^(−1/q)`, `c` chosen so that
/// `Σ σᵢ^q = R_q` exactly.
pub fn generate_near_lowrank(
    k: usize,
    p: usize,
    q: f64,
    radius: f64,
    seed: u64,
) -> Result<GroundTruth> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "q must lie in (0, 1], got {q}; use generate_exact_lowrank for q = 0"
        )));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "radius must be > 0, got {radius}"
        )));
    }
    let m = k.min(p);
    if m == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    // σᵢ^q = c^q / i, so Σ σᵢ^q = c^q · H_m.
    let harmonic: f64 = (1..=m).map(|i| 1.0 / i as f64).sum();
    let c = (radius / harmonic).powf(1.0 / q);
    let spectrum: Vec<f64> = (1..=m).map(|i| c * (i as f64).powf(-1.0 / q)).collect();

    let mut rng = rng_from_seed(seed);
    let u = haar_orthonormal(k, m, &mut rng);
    let v = haar_orthonormal(p, m, &mut rng);
    let theta_star = assemble(&u, &spectrum, &v);
    Ok(GroundTruth {
        theta_star,
        kind: TruthKind::NearLowRank { q, radius },
        factors: SubspacePair::new(u, v)?,
        spectrum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{orthonormality_error, singular_values, svd};
    use approx::assert_relative_eq;

    #[test]
    fn full_rank_unit_scale_is_orthogonal() {
        let g = generate_exact_lowrank(4, 4, 4, 1.0, 3).unwrap();
        assert!(orthonormality_error(&g.theta_star) < 1e-12);
        for s in singular_values(&g.theta_star).unwrap() {
            assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank_ten_of_forty() {
        let g = generate_exact_lowrank(40, 40, 10, 1.0, 9).unwrap();
        let s = singular_values(&g.theta_star).unwrap();
        for &x in &s[..10] {
            assert_relative_eq!(x, 1.0, epsilon = 1e-10);
        }
        assert!(s[10..].iter().all(|&x| x < 1e-10));
        // factors span the column / row spaces
        let f = svd(&g.theta_star).unwrap();
        let top_u = f.u.columns(0, 10).into_owned();
        let overlap = g.factors.u().transpose() * &top_u;
        let sv = singular_values(&overlap).unwrap();
        assert!(sv.iter().all(|&x| (x - 1.0).abs() < 1e-8));
    }

    #[test]
    fn seeds_control_the_draw() {
        let a = generate_exact_lowrank(6, 5, 2, 1.0, 1).unwrap();
        let b = generate_exact_lowrank(6, 5, 2, 1.0, 1).unwrap();
        let c = generate_exact_lowrank(6, 5, 2, 1.0, 2).unwrap();
        assert_eq!(a, b);
        // principal angles between different draws are nondegenerate
        let cosines = singular_values(&(a.factors.u().transpose() * c.factors.u())).unwrap();
        assert!(cosines[0] < 1.0 - 1e-6);
    }

    #[test]
    fn rejects_bad_rank() {
        assert!(generate_exact_lowrank(3, 4, 0, 1.0, 0).is_err());
        assert!(generate_exact_lowrank(3, 4, 4, 1.0, 0).is_err());
        assert!(generate_exact_lowrank(3, 4, 2, 0.0, 0).is_err());
    }

    #[test]
    fn near_lowrank_radius() {
        let g = generate_near_lowrank(7, 5, 1.0, 1.0, 0).unwrap();
        let s = singular_values(&g.theta_star).unwrap();
        assert_relative_eq!(s.iter().sum::<f64>(), 1.0, epsilon = 1e-10);

        let g = generate_near_lowrank(40, 40, 0.5, 10.0, 1).unwrap();
        let s = singular_values(&g.theta_star).unwrap();
        let total: f64 = s.iter().map(|x| x.sqrt()).sum();
        assert!((total - 10.0).abs() <= 1e-8, "{total}");
        assert!(generate_near_lowrank(4, 4, 0.0, 1.0, 0).is_err());
        assert!(generate_near_lowrank(4, 4, 1.5, 1.0, 0).is_err());
        assert!(generate_near_lowrank(4, 4, 0.5, -1.0, 0).is_err());
    }
}

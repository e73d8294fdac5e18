//! Dense matrix primitives: SVD contract, the three matrix norms and the
//! singular-value soft-threshold (the proximal map of the nuclear norm).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::LinearMatrixOperator;
use crate::rng;

pub type DenseMatrix = DMatrix<f64>;

/// Max-abs entrywise deviation of `UᵀU` / `VᵀV` from the identity.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// Relative Frobenius reconstruction error of an SVD.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Singular values at or below `RANK_TOL * σ₁` count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Thin SVD `M = U diag(s) Vᵀ` with `m = min(k, p)` columns in `U` and `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub s: DVector<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(sj);
        }
        us * self.v.transpose()
    }

    /// Numerical rank under the `RANK_TOL * σ₁` cutoff.
    pub fn rank(&self) -> usize {
        numerical_rank(self.s.as_slice())
    }
}

pub fn numerical_rank(sorted_desc: &[f64]) -> usize {
    let top = sorted_desc.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    sorted_desc.iter().filter(|&&s| s > RANK_TOL * top).count()
}

/// A pair of column-orthonormal factors `U (k×r)`, `V (p×r)` spanning the
/// column and row subspaces of a rank-`r` model set.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspacePair {
    u: DenseMatrix,
    v: DenseMatrix,
}

impl SubspacePair {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.ncols() != v.ncols() {
            return Err(Error::Dimension(format!(
                "subspace factors have {} and {} columns",
                u.ncols(),
                v.ncols()
            )));
        }
        if u.ncols() > u.nrows().min(v.nrows()) {
            return Err(Error::Dimension(format!(
                "rank {} exceeds min({}, {})",
                u.ncols(),
                u.nrows(),
                v.nrows()
            )));
        }
        let dev = orthonormality_error(&u).max(orthonormality_error(&v));
        if dev > ORTHONORMALITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "subspace factors are not orthonormal (deviation {dev:e})"
            )));
        }
        Ok(Self { u, v })
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    /// `(k, p)` of the matrices this pair acts on.
    pub fn shape(&self) -> (usize, usize) {
        (self.u.nrows(), self.v.nrows())
    }

    /// `U Uᵀ A V Vᵀ`
    pub fn project_model(&self, a: &DenseMatrix) -> DenseMatrix {
        let inner = self.u.transpose() * a * &self.v;
        &self.u * inner * self.v.transpose()
    }

    /// `(I − U Uᵀ) A (I − V Vᵀ)`
    pub fn project_perp(&self, a: &DenseMatrix) -> DenseMatrix {
        let left = a - &self.u * (self.u.transpose() * a);
        &left - (&left * &self.v) * self.v.transpose()
    }
}

/// Max-abs entry of `QᵀQ − I`.
pub fn orthonormality_error(q: &DenseMatrix) -> f64 {
    let gram = q.transpose() * q;
    let n = gram.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

fn ensure_finite(m: &DenseMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

// The decompositions go through faer: nalgebra's implicit-shift SVD returns
// factors that do not reconstruct some rank-deficient inputs.
fn as_faer(m: &DenseMatrix) -> faer::MatRef<'_, f64> {
    faer::MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

/// Full thin SVD with singular values sorted nonincreasing and each `U`
/// column signed so that its largest-magnitude entry is positive.
pub fn svd(m: &DenseMatrix) -> Result<SvdFactors> {
    ensure_finite(m, "svd input")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(SvdFactors {
            u: DenseMatrix::zeros(rows, 0),
            s: DVector::zeros(0),
            v: DenseMatrix::zeros(cols, 0),
        });
    }
    let raw = as_faer(m)
        .thin_svd()
        .map_err(|_| Error::SvdNoConvergence { rows, cols })?;
    let u = DenseMatrix::from_fn(rows, raw.U().ncols(), |i, j| raw.U()[(i, j)]);
    let v = DenseMatrix::from_fn(cols, raw.V().ncols(), |i, j| raw.V()[(i, j)]);
    let diag = raw.S().column_vector();
    let s = DVector::from_fn(diag.nrows(), |i, _| diag[i]);

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));

    let m_dim = s.len();
    let mut out_u = DenseMatrix::zeros(rows, m_dim);
    let mut out_v = DenseMatrix::zeros(cols, m_dim);
    let mut out_s = DVector::zeros(m_dim);
    for (dst, &src) in order.iter().enumerate() {
        out_s[dst] = s[src].max(0.0);
        let ucol = u.column(src);
        // First index of largest magnitude decides the sign.
        let mut pivot = 0;
        for i in 1..rows {
            if ucol[i].abs() > ucol[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if ucol[pivot] < 0.0 { -1.0 } else { 1.0 };
        out_u.set_column(dst, &(ucol * sign));
        out_v.set_column(dst, &(v.column(src) * sign));
    }
    Ok(SvdFactors {
        u: out_u,
        s: out_s,
        v: out_v,
    })
}

/// Singular values only, sorted nonincreasing.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    ensure_finite(m, "svd input")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    let mut s: Vec<f64> = as_faer(m)
        .singular_values()
        .map_err(|_| Error::SvdNoConvergence { rows, cols })?
        .into_iter()
        .map(|x| x.max(0.0))
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Largest singular value.
pub fn operator_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

pub fn frobenius_norm(m: &DenseMatrix) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Trace inner product `⟨⟨A, B⟩⟩ = Σᵢⱼ AᵢⱼBᵢⱼ`.
pub fn trace_inner(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Output of [`svt_parts`]: the thresholded matrix together with its
/// retained singular values (already shrunk).
#[derive(Debug, Clone)]
pub struct Thresholded {
    pub matrix: DenseMatrix,
    pub shrunk: Vec<f64>,
}

impl Thresholded {
    pub fn rank(&self) -> usize {
        self.shrunk.len()
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.shrunk.iter().sum()
    }
}

/// Singular value soft-thresholding `U diag(max(s − τ, 0)) Vᵀ`.
pub fn svt(m: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    Ok(svt_parts(m, tau)?.matrix)
}

/// Like [`svt`], also returning the shrunk spectrum. Singular values equal
/// to `τ` map to zero.
pub fn svt_parts(m: &DenseMatrix, tau: f64) -> Result<Thresholded> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "threshold must be finite and >= 0, got {tau}"
        )));
    }
    let f = svd(m)?;
    let keep = f.s.iter().take_while(|&&s| s > tau).count();
    let shrunk: Vec<f64> = f.s.iter().take(keep).map(|s| s - tau).collect();
    let mut us = f.u.columns(0, keep).into_owned();
    for (j, &sj) in shrunk.iter().enumerate() {
        us.column_mut(j).scale_mut(sj);
    }
    let matrix = us * f.v.columns(0, keep).transpose();
    Ok(Thresholded { matrix, shrunk })
}

/// Power-iteration estimate of the top eigenvalue of `Θ ↦ 𝔛*(𝔛(Θ))/N`.
///
/// Returns the largest Rayleigh quotient seen; for a PSD map these are
/// nondecreasing along the power sequence.
pub fn composed_operator_norm(op: &dyn LinearMatrixOperator, iters: usize, seed: u64) -> f64 {
    let shape = op.shape();
    let n_obs = shape.n_obs as f64;
    let mut rng = rng::rng_from_seed(seed);
    let mut theta = rng::gaussian_matrix(shape.k, shape.p, &mut rng);
    let norm = frobenius_norm(&theta);
    theta /= norm;
    let mut best = 0.0f64;
    for _ in 0..iters.max(1) {
        let w = op.normal(&theta) / n_obs;
        let rq = trace_inner(&theta, &w);
        best = best.max(rq);
        let wn = frobenius_norm(&w);
        if wn == 0.0 || !wn.is_finite() {
            break;
        }
        theta = w / wn;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, rng_from_seed};
    use approx::assert_relative_eq;

    fn diag(values: &[f64]) -> DenseMatrix {
        DenseMatrix::from_diagonal(&DVector::from_row_slice(values))
    }

    #[test]
    fn svd_reconstructs_rank_deficient_input() {
        let mut rng = rng_from_seed(77);
        for case in 0..300 {
            let n = 4 + case % 9;
            let r = 1 + case % 3;
            let scale = 10f64.powi(-(case as i32 % 5));
            let m = gaussian_matrix(n, r, &mut rng) * gaussian_matrix(r, n, &mut rng) * scale;
            let f = svd(&m).unwrap();
            let err = frobenius_norm(&(f.reconstruct() - &m)) / frobenius_norm(&m);
            assert!(err <= RECONSTRUCTION_TOL, "case {case}: {err:e}");
            assert_eq!(f.rank(), r);
        }
    }

    #[test]
    fn svd_of_diagonal() {
        let f = svd(&diag(&[3.0, 1.0])).unwrap();
        assert_eq!(f.s.as_slice(), &[3.0, 1.0]);
        assert_relative_eq!(f.u.abs(), DenseMatrix::identity(2, 2), epsilon = 1e-14);
        assert_relative_eq!(f.v.abs(), DenseMatrix::identity(2, 2), epsilon = 1e-14);
        // sign convention
        assert!(f.u[(0, 0)] > 0.0 && f.u[(1, 1)] > 0.0);
    }

    #[test]
    fn svd_of_zero_matrix() {
        let f = svd(&DenseMatrix::zeros(4, 3)).unwrap();
        assert_eq!(f.s.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(f.rank(), 0);
        assert!(orthonormality_error(&f.u) < ORTHONORMALITY_TOL);
        assert!(orthonormality_error(&f.v) < ORTHONORMALITY_TOL);
    }

    #[test]
    fn svd_reconstructs_random() {
        for &(k, p) in &[(6, 4), (4, 6), (1, 1), (1, 5), (7, 7)] {
            let m = gaussian_matrix(k, p, &mut rng_from_seed(3));
            let f = svd(&m).unwrap();
            let rel = frobenius_norm(&(f.reconstruct() - &m)) / frobenius_norm(&m);
            assert!(rel <= RECONSTRUCTION_TOL, "{k}x{p}: {rel:e}");
            assert!(orthonormality_error(&f.u) <= ORTHONORMALITY_TOL);
            assert!(orthonormality_error(&f.v) <= ORTHONORMALITY_TOL);
            assert!(f.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
            assert!(f.s.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn svd_rejects_nan() {
        let mut m = DenseMatrix::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&m), Err(Error::NonFinite(_))));
        assert!(singular_values(&m).is_err());
    }

    #[test]
    fn svd_is_deterministic() {
        let m = gaussian_matrix(9, 5, &mut rng_from_seed(8));
        assert_eq!(svd(&m).unwrap(), svd(&m).unwrap());
    }

    #[test]
    fn norms_of_known_matrices() {
        let d = diag(&[3.0, 1.0]);
        assert_relative_eq!(nuclear_norm(&d).unwrap(), 4.0, epsilon = 1e-14);
        assert_relative_eq!(operator_norm(&d).unwrap(), 3.0, epsilon = 1e-14);
        assert_relative_eq!(frobenius_norm(&d), 10f64.sqrt(), epsilon = 1e-14);

        let mut rng = rng_from_seed(5);
        let mut u = gaussian_matrix(5, 1, &mut rng);
        let mut v = gaussian_matrix(3, 1, &mut rng);
        u /= frobenius_norm(&u);
        v /= frobenius_norm(&v);
        let r1 = &u * v.transpose();
        assert_relative_eq!(nuclear_norm(&r1).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(operator_norm(&r1).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(frobenius_norm(&r1), 1.0, epsilon = 1e-12);

        let eye = DenseMatrix::identity(6, 6);
        assert_relative_eq!(nuclear_norm(&eye).unwrap(), 6.0, epsilon = 1e-12);
        assert_relative_eq!(operator_norm(&eye).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(frobenius_norm(&eye), 6f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn svt_known_cases() {
        let out = svt(&diag(&[3.0, 1.0]), 2.0).unwrap();
        assert_relative_eq!(out, diag(&[1.0, 0.0]), epsilon = 1e-14);

        let m = gaussian_matrix(4, 5, &mut rng_from_seed(1));
        assert_relative_eq!(svt(&m, 0.0).unwrap(), m.clone(), epsilon = 1e-12);

        // threshold equal to a singular value drops it
        let t = svt_parts(&diag(&[2.0, 1.0]), 1.0).unwrap();
        assert_eq!(t.rank(), 1);

        assert!(svt(&m, -1.0).is_err());
        assert!(svt(&m, f64::NAN).is_err());
    }

    #[test]
    fn svt_on_degenerate_shapes() {
        let one = DenseMatrix::from_element(1, 1, -2.5);
        assert_relative_eq!(svt(&one, 1.0).unwrap()[(0, 0)], -1.5, epsilon = 1e-14);
        let zero = DenseMatrix::zeros(3, 2);
        assert_eq!(svt(&zero, 0.5).unwrap(), zero);
        assert_eq!(nuclear_norm(&zero).unwrap(), 0.0);
        assert_eq!(operator_norm(&zero).unwrap(), 0.0);
    }

    #[test]
    fn svt_matches_independent_full_svd_and_is_prox_optimal() {
        use rand::Rng;
        let mut rng = rng_from_seed(21);
        let m = gaussian_matrix(5, 4, &mut rng);
        let tau = 0.7;
        let out = svt(&m, tau).unwrap();

        // independent route: nalgebra's own SVD, no sorting or sign fixing
        let raw = m.clone().svd(true, true);
        let u = raw.u.unwrap();
        let v_t = raw.v_t.unwrap();
        let shrunk = raw.singular_values.map(|s| (s - tau).max(0.0));
        let oracle = &u * DenseMatrix::from_diagonal(&shrunk) * &v_t;
        assert_relative_eq!(out, oracle, epsilon = 1e-12);

        let prox_obj = |z: &DenseMatrix| {
            0.5 * frobenius_norm(&(z - &m)).powi(2) + tau * nuclear_norm(z).unwrap()
        };
        let best = prox_obj(&out);
        for _ in 0..1000 {
            let scale: f64 = rng.random_range(1e-4..1e-1);
            let dir = gaussian_matrix(5, 4, &mut rng);
            let perturbed = &out + dir * (scale / 2.0);
            assert!(prox_obj(&perturbed) >= best - 1e-12);
        }
    }

    #[test]
    fn subspace_projections_are_complementary() {
        let mut rng = rng_from_seed(4);
        let q = gaussian_matrix(6, 2, &mut rng).qr().q();
        let w = gaussian_matrix(5, 2, &mut rng).qr().q();
        let pair = SubspacePair::new(q, w).unwrap();
        let a = gaussian_matrix(6, 5, &mut rng);
        let pm = pair.project_model(&a);
        assert_relative_eq!(pair.project_model(&pm), pm.clone(), epsilon = 1e-12);
        assert_relative_eq!(
            pair.project_perp(&pm),
            DenseMatrix::zeros(6, 5),
            epsilon = 1e-12
        );
        assert!(SubspacePair::new(
            DenseMatrix::from_element(3, 1, 1.0),
            DenseMatrix::from_element(3, 1, 1.0)
        )
        .is_err());
    }
}

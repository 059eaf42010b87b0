//! Dense symmetric linear algebra primitives.
//!
//! Everything downstream is built on symmetric eigendecompositions: PSD
//! square roots, inverse square roots with spectral flooring, and orthogonal
//! projectors. Symmetric roots (rather than Cholesky factors) are the default
//! so intermediate products stay symmetric; a Cholesky path is kept as a
//! cross-check of the orthogonal-factor freedom.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative tolerance for accepting a noisy matrix as symmetric.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-8;

/// Relative tolerance below which a slightly negative eigenvalue is treated
/// as PSD noise rather than genuine indefiniteness.
pub const PSD_TOL: f64 = 1e-8;

/// Default relative eigenvalue floor applied before inversions.
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-12;

/// A real symmetric matrix, symmetrized as (A + A^T)/2 at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    mat: DMatrix<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from `mat`, rejecting inputs whose relative
    /// asymmetry exceeds `symmetry_tol`.
    pub fn with_tol(mat: DMatrix<f64>, symmetry_tol: f64) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                context: "SymMatrix::new (square)",
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        if mat.nrows() == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "matrix dimension must be at least 1".into(),
            });
        }
        let norm = mat.norm();
        let asym = (&mat - mat.transpose()).norm();
        if norm > 0.0 && asym > symmetry_tol * norm {
            return Err(Error::NotSymmetric {
                asymmetry: asym / norm,
                tol: symmetry_tol,
            });
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        Ok(Self { mat: sym })
    }

    /// Builds a symmetric matrix with the default symmetry tolerance.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        Self::with_tol(mat, DEFAULT_SYMMETRY_TOL)
    }

    /// Symmetrizes unconditionally; used for products that are symmetric by
    /// construction up to roundoff.
    pub fn symmetrize(mat: DMatrix<f64>) -> Self {
        let sym = (&mat + mat.transpose()) * 0.5;
        Self { mat: sym }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &DVector<f64>) -> Self {
        Self {
            mat: DMatrix::from_diagonal(diag),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }

    /// Largest absolute eigenvalue, i.e. the spectral norm.
    pub fn spectral_norm(&self) -> f64 {
        let decomp = SpectralDecomp::new(self);
        decomp
            .eigenvalues()
            .iter()
            .fold(0.0f64, |m, &l| m.max(l.abs()))
    }

    /// Verifies the matrix is PSD up to `-tol * spectral_norm` noise.
    pub fn check_psd(&self, tol: f64) -> Result<SpectralDecomp> {
        let decomp = SpectralDecomp::new(self);
        let scale = decomp
            .eigenvalues()
            .iter()
            .fold(0.0f64, |m, &l| m.max(l.abs()));
        let min_eig = decomp.min_eigenvalue();
        if min_eig < -tol * scale {
            return Err(Error::IndefiniteInput {
                min_eig,
                tol: tol * scale,
            });
        }
        Ok(decomp)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.mat[idx]
    }
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// ascending and orthonormal column eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomp {
    pub fn new(a: &SymMatrix) -> Self {
        let eig = a.mat.clone().symmetric_eigen();
        let n = a.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Reassembles Q f(lambda) Q^T.
    pub fn map_eigenvalues<F: Fn(f64) -> f64>(&self, f: F) -> SymMatrix {
        let mapped = DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&l| f(l)),
        );
        let qd = &self.eigenvectors * DMatrix::from_diagonal(&mapped);
        SymMatrix::symmetrize(qd * self.eigenvectors.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map_eigenvalues(|l| l)
    }
}

/// Symmetric PSD square root of `a` with eigenvalues clamped below at the
/// absolute value `floor` before taking the root.
pub fn spd_sqrt(a: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    if floor < 0.0 {
        return Err(Error::InvalidParameter {
            name: "floor",
            reason: format!("must be nonnegative, got {floor}"),
        });
    }
    let decomp = a.check_psd(PSD_TOL)?;
    Ok(decomp.map_eigenvalues(|l| l.max(floor).max(0.0).sqrt()))
}

/// Symmetric inverse square root with relative spectral flooring: directions
/// with eigenvalue below `eigen_floor * lambda_max` are treated as having
/// eigenvalue exactly at that floor, so B A' B = I for the floored A'.
pub fn inv_sqrt_factor(a: &SymMatrix, eigen_floor: f64) -> Result<SymMatrix> {
    if eigen_floor <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "eigen_floor",
            reason: format!("must be positive, got {eigen_floor}"),
        });
    }
    let decomp = a.check_psd(PSD_TOL)?;
    let lambda_max = decomp.max_eigenvalue();
    if lambda_max <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let floor = eigen_floor * lambda_max;
    Ok(decomp.map_eigenvalues(|l| 1.0 / l.max(floor).sqrt()))
}

/// Lower-triangular Cholesky factor L with L L^T = A. Cross-check path for
/// the orthogonal freedom in choosing a factor half; requires A PD.
pub fn cholesky_factor(a: &SymMatrix) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(a.mat.clone())
        .map(|c| c.l())
        .ok_or(Error::IndefiniteInput {
            min_eig: f64::NAN,
            tol: 0.0,
        })
}

/// Relative singular-value cutoff used for rank decisions on spanning sets.
const RANK_TOL: f64 = 1e-12;

/// Orthogonal projector onto the span of `basis` inside R^dim.
///
/// Rank detection uses an SVD of the stacked basis so linearly dependent and
/// nearly dependent spanning vectors are handled uniformly.
pub fn projector(basis: &[DVector<f64>], dim: usize) -> Result<SymMatrix> {
    if basis.is_empty() {
        return Ok(SymMatrix::zeros(dim));
    }
    for v in basis {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "projector basis vector",
                expected: dim,
                got: v.len(),
            });
        }
    }
    let mut stacked = DMatrix::zeros(dim, basis.len());
    for (j, v) in basis.iter().enumerate() {
        stacked.set_column(j, v);
    }
    if stacked.norm() == 0.0 {
        return Err(Error::ZeroBasis);
    }
    let svd = stacked.svd(true, false);
    let u = svd.u.expect("SVD with u requested");
    let sv_max = svd.singular_values.max();
    let mut p = DMatrix::zeros(dim, dim);
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if s > RANK_TOL * sv_max {
            let col = u.column(j);
            p += &col * col.transpose();
        }
    }
    Ok(SymMatrix::symmetrize(p))
}

/// Complement projector I - P.
pub fn complement_projector(p: &SymMatrix) -> SymMatrix {
    let n = p.dim();
    SymMatrix::symmetrize(DMatrix::identity(n, n) - p.as_matrix())
}

/// Numerical rank at a relative eigenvalue threshold, for symmetric PSD
/// matrices.
pub fn numerical_rank(a: &SymMatrix, rel_tol: f64) -> usize {
    let decomp = SpectralDecomp::new(a);
    let scale = decomp.max_eigenvalue().abs().max(
        decomp.min_eigenvalue().abs(),
    );
    if scale == 0.0 {
        return 0;
    }
    decomp
        .eigenvalues()
        .iter()
        .filter(|&&l| l.abs() > rel_tol * scale)
        .count()
}

/// Relative Frobenius distance `|a - b| / max(|b|, tiny)`.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_psd(n: usize, rank: usize, rng: &mut impl Rng) -> SymMatrix {
        let g = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::symmetrize(&g * g.transpose())
    }

    fn random_pd(n: usize, rng: &mut impl Rng) -> SymMatrix {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::symmetrize(&g * g.transpose() + DMatrix::identity(n, n) * 0.1)
    }

    #[test]
    fn sym_matrix_rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            SymMatrix::new(m),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn sym_matrix_symmetrizes_noise() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0 + 1e-12, 2.0, 1.0]);
        let s = SymMatrix::new(m).unwrap();
        assert_eq!(s[(0, 1)], s[(1, 0)]);
    }

    #[test]
    fn spectral_decomp_reconstructs() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let a = random_pd(6, &mut rng);
        let d = SpectralDecomp::new(&a);
        let rec = d.reconstruct();
        assert!(rel_frobenius(rec.as_matrix(), a.as_matrix()) <= 1e-10);
        let q = d.eigenvectors();
        let qtq = q.transpose() * q;
        assert!((qtq - DMatrix::identity(6, 6)).norm() <= 1e-10);
        for i in 1..6 {
            assert!(d.eigenvalues()[i] >= d.eigenvalues()[i - 1]);
        }
    }

    #[test]
    fn spd_sqrt_identity() {
        let s = spd_sqrt(&SymMatrix::identity(3), 0.0).unwrap();
        assert!(rel_frobenius(s.as_matrix(), &DMatrix::identity(3, 3)) <= 1e-12);
    }

    #[test]
    fn spd_sqrt_diagonal() {
        let a = SymMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let s = spd_sqrt(&a, 0.0).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert!(rel_frobenius(s.as_matrix(), &expected) <= 1e-12);
    }

    #[test]
    fn spd_sqrt_multiply_back() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let a = random_psd(6, 6, &mut rng);
        let s = spd_sqrt(&a, 0.0).unwrap();
        let back = s.as_matrix() * s.as_matrix();
        assert!(rel_frobenius(&back, a.as_matrix()) <= 1e-10);
    }

    #[test]
    fn spd_sqrt_rejects_indefinite() {
        let a = SymMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5]));
        assert!(matches!(
            spd_sqrt(&a, 0.0),
            Err(Error::IndefiniteInput { .. })
        ));
    }

    #[test]
    fn inv_sqrt_factor_diagonal() {
        let a = SymMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 16.0]));
        let b = inv_sqrt_factor(&a, 1e-12).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25]));
        assert!(rel_frobenius(b.as_matrix(), &expected) <= 1e-12);
    }

    #[test]
    fn inv_sqrt_factor_identity() {
        let b = inv_sqrt_factor(&SymMatrix::identity(5), 1e-12).unwrap();
        assert!(rel_frobenius(b.as_matrix(), &DMatrix::identity(5, 5)) <= 1e-12);
    }

    #[test]
    fn inv_sqrt_factor_multiply_back() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let a = random_pd(5, &mut rng);
        let b = inv_sqrt_factor(&a, 1e-12).unwrap();
        let back = b.as_matrix() * a.as_matrix() * b.as_matrix();
        assert!((back - DMatrix::identity(5, 5)).norm() <= 1e-9);
    }

    #[test]
    fn inv_sqrt_factor_rejects_zero() {
        assert!(matches!(
            inv_sqrt_factor(&SymMatrix::zeros(3), 1e-12),
            Err(Error::ZeroMatrix)
        ));
    }

    #[test]
    fn projector_coordinate_axis() {
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let p = projector(&[e1], 4).unwrap();
        let expected =
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]));
        assert!(rel_frobenius(p.as_matrix(), &expected) <= 1e-12);
    }

    #[test]
    fn projector_diagonal_direction() {
        let v = DVector::from_vec(vec![1.0, 1.0]) / 2.0f64.sqrt();
        let p = projector(&[v], 2).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!(rel_frobenius(p.as_matrix(), &expected) <= 1e-12);
    }

    #[test]
    fn projector_rejects_zero_basis() {
        let z = DVector::zeros(3);
        assert!(matches!(projector(&[z], 3), Err(Error::ZeroBasis)));
    }

    /// Gram-Schmidt oracle: orthonormalize independently and compare the
    /// projector built from the orthonormal columns.
    #[test]
    fn projector_matches_gram_schmidt_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let basis: Vec<DVector<f64>> = (0..3)
            .map(|_| DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let p = projector(&basis, 6).unwrap();

        let mut ortho: Vec<DVector<f64>> = Vec::new();
        for v in &basis {
            let mut w = v.clone();
            for u in &ortho {
                let c = u.dot(&w);
                w -= u * c;
            }
            if w.norm() > 1e-10 {
                let n = w.norm();
                ortho.push(w / n);
            }
        }
        let mut p_oracle = DMatrix::zeros(6, 6);
        for u in &ortho {
            p_oracle += u * u.transpose();
        }
        assert_eq!(numerical_rank(&p, 1e-10), ortho.len());
        assert!(rel_frobenius(p.as_matrix(), &p_oracle) <= 1e-9);
        // Idempotency.
        let p2 = p.as_matrix() * p.as_matrix();
        assert!((p2 - p.as_matrix()).norm() <= 1e-12);
    }

    #[test]
    fn factor_halves_differ_by_orthogonal_map() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let a = random_pd(5, &mut rng);
        let l1 = spd_sqrt(&a, 0.0).unwrap().into_matrix();
        let l2 = cholesky_factor(&a).unwrap();
        let u = l1.clone().try_inverse().unwrap() * &l2;
        let utu = u.transpose() * &u;
        assert!((utu - DMatrix::identity(5, 5)).norm() <= 1e-8);
    }

    proptest! {
        #[test]
        fn flooring_is_monotone(seed in 0u64..64, f1 in 0.0f64..0.5, bump in 0.0f64..0.5) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let a = random_psd(4, 3, &mut rng);
            let lo = spd_sqrt(&a, f1).unwrap();
            let hi = spd_sqrt(&a, f1 + bump).unwrap();
            let min_lo = SpectralDecomp::new(&lo).min_eigenvalue();
            let min_hi = SpectralDecomp::new(&hi).min_eigenvalue();
            prop_assert!(min_hi >= min_lo - 1e-12);
        }

        #[test]
        fn complementary_projectors_sum_to_identity(seed in 0u64..64) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let basis: Vec<DVector<f64>> = (0..2)
                .map(|_| DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0)))
                .collect();
            let p = projector(&basis, 5).unwrap();
            let q = complement_projector(&p);
            let sum = p.as_matrix() + q.as_matrix();
            prop_assert!((sum - DMatrix::identity(5, 5)).norm() <= 1e-12);
            // Complement projects onto the orthogonal complement of the span.
            for v in &basis {
                prop_assert!((q.as_matrix() * v).norm() <= 1e-9 * v.norm().max(1.0));
            }
        }

        #[test]
        fn spd_sqrt_output_is_psd(seed in 0u64..64) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let a = random_psd(5, 3, &mut rng);
            let s = spd_sqrt(&a, 0.0).unwrap();
            let min = SpectralDecomp::new(&s).min_eigenvalue();
            prop_assert!(min >= -1e-10 * s.spectral_norm().max(1e-300));
        }
    }
}

//! Symmetric and positive semi-definite matrix kernels.
//!
//! Every routine here goes through a single symmetric eigendecomposition,
//! which stays well behaved on rank-deficient covariances where Cholesky or
//! Newton-Schulz iterations break down.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, UstError};

/// Relative eigenvalue tolerance below which negative eigenvalues are treated
/// as round-off by [`psd_sqrt`].
pub const DEFAULT_CLAMP_TOL: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-9;
const EIGEN_MAX_ITER: usize = 10_000;

/// A square symmetric matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps a matrix after checking it is square, non-empty, finite and
    /// symmetric within `1e-9 * (1 + |m_ij|)`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(UstError::InvalidDimension(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(UstError::InvalidData(
                "matrix has non-finite entries".into(),
            ));
        }
        check_symmetric(&m)?;
        Ok(SymMatrix(m))
    }

    /// Builds a symmetric matrix from row-major values.
    pub fn from_row_slice(dim: usize, values: &[f64]) -> Result<Self> {
        if dim == 0 || values.len() != dim * dim {
            return Err(UstError::InvalidDimension(format!(
                "expected {} values for a {dim}x{dim} matrix, got {}",
                dim * dim,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, values))
    }

    /// Averages `m` with its transpose, producing an exactly symmetric matrix.
    pub fn symmetrize(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(UstError::InvalidDimension(format!(
                "cannot symmetrize a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(SymMatrix(symmetrized(m)))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        SymMatrix(m)
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (m[(i, j)] - m[(j, i)]).abs();
            if gap > SYMMETRY_TOL * (1.0 + m[(i, j)].abs()) {
                return Err(UstError::SymmetryViolation {
                    row: i,
                    col: j,
                    gap,
                });
            }
        }
    }
    Ok(())
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// stored as columns.
///
/// Each eigenvector is oriented so that its first non-zero component is
/// positive, which makes the decomposition reproducible across runs.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Eigenvalues at or below `64 * dim * eps * lambda_max` are treated as
    /// round-off. The factor absorbs the backward error of the eigensolver
    /// plus the products that built the matrix, so a rank-deficient input
    /// yields the same result after an orthogonal change of basis.
    pub fn roundoff_floor(&self) -> f64 {
        64.0 * self.eigenvalues.len() as f64 * f64::EPSILON * self.max_eigenvalue().max(0.0)
    }

    /// Square roots of the eigenvalues, with round-off-sized ones set to 0.
    pub fn sqrt_eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        let floor = self.roundoff_floor();
        self.eigenvalues
            .iter()
            .map(move |&l| if l > floor { l.sqrt() } else { 0.0 })
    }

    /// Computes `V * diag(f(lambda)) * V^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = f(lambda);
            scaled.column_mut(j).scale_mut(s);
        }
        let out = &scaled * self.eigenvectors.transpose();
        symmetrized(&out)
    }
}

/// Symmetric eigendecomposition.
pub fn sym_eigen(m: &SymMatrix) -> Result<SymEigen> {
    check_symmetric(&m.0)?;
    let n = m.dim();
    let eig =
        m.0.clone()
            .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
            .ok_or_else(|| {
                UstError::NumericalFailure(format!(
                    "symmetric eigendecomposition of a {n}x{n} matrix did not converge"
                ))
            })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = DVector::zeros(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let sign = match col.iter().find(|v| **v != 0.0) {
            Some(v) if *v < 0.0 => -1.0,
            _ => 1.0,
        };
        eigenvectors.set_column(dst, &(col * sign));
    }
    Ok(SymEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Principal square root of a positive semi-definite matrix.
///
/// Eigenvalues in `[-clamp_tol * lambda_max, 0)` are treated as round-off and
/// clamped to zero; anything more negative is rejected. Positive eigenvalues
/// at round-off level are also zeroed, since their square roots would
/// otherwise inject `sqrt(eps)`-sized noise into rank-deficient inputs.
pub fn psd_sqrt(m: &SymMatrix, clamp_tol: f64) -> Result<SymMatrix> {
    let eig = sym_eigen(m)?;
    check_psd_spectrum(&eig, clamp_tol)?;
    let floor = eig.roundoff_floor();
    Ok(SymMatrix(eig.reconstruct_with(|l| {
        if l > floor {
            l.sqrt()
        } else {
            0.0
        }
    })))
}

pub(crate) fn check_psd_spectrum(eig: &SymEigen, clamp_tol: f64) -> Result<()> {
    let threshold = -clamp_tol * eig.max_eigenvalue().max(0.0);
    let lowest = eig.min_eigenvalue();
    if lowest < threshold {
        return Err(UstError::NotPsd {
            eigenvalue: lowest,
            threshold,
        });
    }
    Ok(())
}

/// Projects onto the PSD cone by clamping negative eigenvalues to zero.
///
/// The input is symmetrized first. A matrix whose computed spectrum is
/// already non-negative is returned as is.
pub fn make_psd(m: &SymMatrix) -> Result<SymMatrix> {
    let sym = SymMatrix(symmetrized(&m.0));
    let eig = sym_eigen(&sym)?;
    if eig.min_eigenvalue() >= 0.0 {
        return Ok(sym);
    }
    Ok(SymMatrix(eig.reconstruct_with(|l| l.max(0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| uniform(rng))
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        SymMatrix::symmetrize(&random_matrix(rng, n, n)).unwrap()
    }

    #[test]
    fn eigen_of_identity() {
        let eig = sym_eigen(&SymMatrix::identity(3)).unwrap();
        for l in eig.eigenvalues.iter() {
            assert!((l - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn eigen_of_diagonal_is_sorted_axes() {
        let eig = sym_eigen(&SymMatrix::from_diagonal(&[1.0, 4.0])).unwrap();
        assert_eq!(eig.eigenvalues.as_slice(), &[4.0, 1.0]);
        assert_eq!(eig.eigenvectors[(1, 0)].abs(), 1.0);
        assert_eq!(eig.eigenvectors[(0, 1)].abs(), 1.0);
        assert_eq!(eig.eigenvectors[(0, 0)], 0.0);
    }

    #[test]
    fn eigen_reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_symmetric(&mut rng, 8);
            let eig = sym_eigen(&m).unwrap();
            let rebuilt = eig.reconstruct_with(|l| l);
            let err = (&rebuilt - m.as_matrix()).norm();
            assert!(err <= 1e-10 * m.frobenius_norm(), "err {err}");
            let gram = eig.eigenvectors.transpose() * &eig.eigenvectors;
            let ortho = (gram - DMatrix::<f64>::identity(8, 8)).amax();
            assert!(ortho <= 1e-10, "orthogonality {ortho}");
            for w in eig.eigenvalues.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn eigenvector_sign_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_symmetric(&mut rng, 6);
        let eig = sym_eigen(&m).unwrap();
        for col in eig.eigenvectors.column_iter() {
            let first = col.iter().find(|v| **v != 0.0).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            SymMatrix::new(m),
            Err(UstError::SymmetryViolation { .. })
        ));
        let bad =
            SymMatrix::from_matrix_unchecked(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]));
        assert!(matches!(
            sym_eigen(&bad),
            Err(UstError::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn rejects_empty_and_non_square() {
        assert!(SymMatrix::new(DMatrix::zeros(0, 0)).is_err());
        assert!(SymMatrix::new(DMatrix::zeros(2, 3)).is_err());
        assert!(SymMatrix::from_row_slice(2, &[1.0; 3]).is_err());
    }

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        let r = psd_sqrt(&SymMatrix::identity(2), DEFAULT_CLAMP_TOL).unwrap();
        assert_eq!(r, SymMatrix::identity(2));
        let r = psd_sqrt(&SymMatrix::from_diagonal(&[4.0, 9.0]), DEFAULT_CLAMP_TOL).unwrap();
        assert_eq!(r.to_row_major(), vec![2.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for rank in [6, 3, 1] {
            let a = random_matrix(&mut rng, 6, rank);
            let m = SymMatrix::symmetrize(&(&a * a.transpose())).unwrap();
            let r = psd_sqrt(&m, DEFAULT_CLAMP_TOL).unwrap();
            let sq = r.as_matrix() * r.as_matrix();
            let err = (sq - m.as_matrix()).norm();
            assert!(
                err <= 1e-8 * m.frobenius_norm().max(1.0),
                "rank {rank}: {err}"
            );
        }
    }

    #[test]
    fn sqrt_of_scaled_identity_and_scalars() {
        for c in [0.0, 0.25, 2.0, 1e6] {
            let m = SymMatrix::from_diagonal(&[c; 4]);
            let r = psd_sqrt(&m, DEFAULT_CLAMP_TOL).unwrap();
            let expected = DMatrix::<f64>::identity(4, 4) * c.sqrt();
            assert!((r.as_matrix() - expected).amax() <= 1e-12 * (1.0 + c.sqrt()));

            let s = psd_sqrt(&SymMatrix::from_diagonal(&[c]), DEFAULT_CLAMP_TOL).unwrap();
            assert_eq!(s.as_matrix()[(0, 0)], c.sqrt());
        }
    }

    #[test]
    fn sqrt_rejects_negative_definite() {
        let m = SymMatrix::from_diagonal(&[1.0, -0.5]);
        assert!(matches!(
            psd_sqrt(&m, DEFAULT_CLAMP_TOL),
            Err(UstError::NotPsd { .. })
        ));
        let tiny = SymMatrix::from_diagonal(&[1.0, -1e-12]);
        let r = psd_sqrt(&tiny, DEFAULT_CLAMP_TOL).unwrap();
        assert_eq!(r.to_row_major(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn make_psd_clamps_and_fixes() {
        let m = SymMatrix::from_diagonal(&[1.0, -1e-14]);
        assert_eq!(
            make_psd(&m).unwrap().to_row_major(),
            vec![1.0, 0.0, 0.0, 0.0]
        );

        let psd = SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        assert_eq!(make_psd(&psd).unwrap(), psd);
    }

    #[test]
    fn make_psd_matches_eigen_clamp_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 5, 3);
        let base = &a * a.transpose();
        let noise = random_matrix(&mut rng, 5, 5) * 1e-3;
        let perturbed = &base + &noise + noise.transpose();
        let sym = SymMatrix::symmetrize(&perturbed).unwrap();

        // Oracle: clamp each eigenpair independently and sum outer products.
        let eig = sym_eigen(&sym).unwrap();
        let mut oracle = DMatrix::zeros(5, 5);
        for (j, l) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(j);
            oracle += v * v.transpose() * l.max(0.0);
        }
        let fixed = make_psd(&sym).unwrap();
        assert!((fixed.as_matrix() - &oracle).amax() < 1e-12);
        let spectrum = sym_eigen(&fixed).unwrap();
        assert!(spectrum.min_eigenvalue() >= -1e-12 * spectrum.max_eigenvalue());

        let twice = make_psd(&fixed).unwrap();
        assert!((twice.as_matrix() - fixed.as_matrix()).amax() < 1e-12);
    }
}

//! Draws style vectors from a Gaussian style model.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, UstError};
use crate::linalg::{check_psd_spectrum, sym_eigen, DEFAULT_CLAMP_TOL};
use crate::model::{GaussianStyleModel, StyleVector, VectorBatch};
use crate::rng::NormalStream;

/// Eigenvalues below this fraction of the largest one are treated as zero.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Precomputed transform `x = mean + V diag(sqrt(lambda)) z` for one model.
///
/// Built from the eigendecomposition rather than a Cholesky factor so that
/// rank-deficient covariances sample on their support subspace.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    mean: DVector<f64>,
    transform: DMatrix<f64>,
    rank: usize,
}

impl GaussianSampler {
    pub fn new(model: &GaussianStyleModel) -> Result<Self> {
        let eig = sym_eigen(model.covariance())?;
        check_psd_spectrum(&eig, DEFAULT_CLAMP_TOL).map_err(|e| {
            UstError::NumericalFailure(format!("cannot sample from `{}`: {e}", model.label()))
        })?;
        let cutoff = SUPPORT_TOL * eig.max_eigenvalue().max(0.0);
        let mut transform = eig.eigenvectors.clone();
        let mut rank = 0;
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > cutoff && lambda > 0.0 {
                transform.column_mut(j).scale_mut(lambda.sqrt());
                rank += 1;
            } else {
                transform.column_mut(j).fill(0.0);
            }
        }
        Ok(GaussianSampler {
            mean: DVector::from_column_slice(model.mean()),
            transform,
            rank,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of retained eigen-directions.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Draws `count` vectors from the stream seeded by `seed`. Each vector
    /// consumes `dim` consecutive normals.
    pub fn sample(&self, seed: u64, count: usize) -> Result<VectorBatch> {
        if count == 0 {
            return Err(UstError::InvalidInput(
                "sample count must be positive".into(),
            ));
        }
        let dim = self.dim();
        let mut normals = NormalStream::new(seed);
        let mut z = DVector::zeros(dim);
        let mut x = DVector::zeros(dim);
        let mut out = Vec::with_capacity(count * dim);
        for _ in 0..count {
            normals.fill(z.as_mut_slice());
            x.copy_from(&self.mean);
            x.gemv(1.0, &self.transform, &z, 1.0);
            out.extend_from_slice(x.as_slice());
        }
        VectorBatch::from_rows(dim, out)
    }
}

/// Draws `count` style vectors from `model`; identical arguments give
/// bit-identical output.
pub fn sample(model: &GaussianStyleModel, seed: u64, count: usize) -> Result<Vec<StyleVector>> {
    let batch = GaussianSampler::new(model)?.sample(seed, count)?;
    batch.rows().map(|r| StyleVector::new(r.to_vec())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;

    fn model(mean: &[f64], cov: SymMatrix) -> GaussianStyleModel {
        GaussianStyleModel::new("m", 10, mean.to_vec(), cov).unwrap()
    }

    #[test]
    fn zero_covariance_returns_mean() {
        let m = model(&[1.5, -2.0, 0.25], SymMatrix::zeros(3));
        let draws = sample(&m, 3, 50).unwrap();
        for d in draws {
            assert_eq!(d.as_slice(), &[1.5, -2.0, 0.25]);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cov = SymMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let m = model(&[0.0, 1.0], cov);
        let a = sample(&m, 17, 20).unwrap();
        let b = sample(&m, 17, 20).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample(&m, 18, 20).unwrap());
    }

    #[test]
    fn rank_deficient_support() {
        // Support spanned by (1, 1, 0) / sqrt 2, shifted by the mean.
        let cov =
            SymMatrix::from_row_slice(3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let mean = [3.0, -1.0, 2.0];
        let sampler = GaussianSampler::new(&model(&mean, cov.clone())).unwrap();
        assert_eq!(sampler.rank(), 1);
        let batch = sampler.sample(5, 1000).unwrap();
        let axis = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0];
        for row in batch.rows() {
            let dev: Vec<f64> = row.iter().zip(&mean).map(|(x, m)| x - m).collect();
            let along: f64 = dev.iter().zip(&axis).map(|(d, a)| d * a).sum();
            let off: f64 = dev
                .iter()
                .zip(&axis)
                .map(|(d, a)| (d - along * a).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(off <= 1e-9, "off-support component {off}");
        }
    }

    #[test]
    fn count_must_be_positive() {
        let m = model(&[0.0], SymMatrix::identity(1));
        assert!(sample(&m, 0, 0).is_err());
    }
}

//! Shared inputs for the criterion benchmarks in `benches/`.

use ust_core::rng::{NormalStream, UniformStream};
use ust_core::{GaussianStyleModel, SymMatrix, VectorBatch};

/// A model of dimension `dim` whose covariance has the given rank.
pub fn random_model(label: &str, dim: usize, rank: usize, seed: u64) -> GaussianStyleModel {
    let mut u = UniformStream::new(seed);
    let mut f = vec![0.0; dim * rank];
    f.iter_mut().for_each(|v| *v = u.next_range(-1.0, 1.0));
    let mut cov = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            cov[i * dim + j] = (0..rank).map(|k| f[i * rank + k] * f[j * rank + k]).sum();
        }
    }
    let mean = (0..dim).map(|_| u.next_range(-1.0, 1.0)).collect();
    let cov = SymMatrix::from_row_slice(dim, &cov).expect("symmetric by construction");
    GaussianStyleModel::new(label, 100, mean, cov).expect("valid model")
}

/// `count` standard-normal vectors of dimension `dim`.
pub fn random_batch(dim: usize, count: usize, seed: u64) -> VectorBatch {
    let mut z = NormalStream::new(seed);
    let mut data = vec![0.0; dim * count];
    z.fill(&mut data);
    VectorBatch::from_rows(dim, data).expect("finite data")
}

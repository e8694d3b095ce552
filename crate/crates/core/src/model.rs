//! Streaming estimation of Gaussian style models.
//!
//! A [`StreamingEstimator`] keeps only a count, a running mean and a scatter
//! matrix (sum of outer products of deviations from the mean), so its memory
//! footprint depends on the vector dimension alone. Batches are merged with
//! the exact pooled update
//!
//! ```text
//! mean'    = mean + m / (n + m) * (mean_b - mean)
//! scatter' = scatter + scatter_b + n m / (n + m) * (mean - mean_b)(mean - mean_b)^T
//! ```
//!
//! which gives the same statistics as a single pass over every vector seen.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::codec::{put_f64s, put_u32, put_u64, ByteReader};
use crate::error::{Result, UstError};
use crate::linalg::{check_psd_spectrum, make_psd, sym_eigen, SymMatrix, DEFAULT_CLAMP_TOL};

/// A style vector: finite feature statistics of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct StyleVector(Vec<f64>);

impl StyleVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(UstError::InvalidDimension(
                "style vector must be non-empty".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(UstError::InvalidData(format!(
                "style vector entry {i} is not finite"
            )));
        }
        Ok(StyleVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// `count` vectors of a common dimension, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorBatch {
    dim: usize,
    data: Vec<f64>,
}

impl VectorBatch {
    /// Wraps row-major data. Entries are not checked for finiteness here;
    /// [`StreamingEstimator::update`] does that.
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(UstError::InvalidDimension(
                "batch dimension must be positive".into(),
            ));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(UstError::InvalidDimension(format!(
                "batch payload of {} values is not a non-empty multiple of dim {dim}",
                data.len()
            )));
        }
        Ok(VectorBatch { dim, data })
    }

    pub fn from_vectors(vectors: &[StyleVector]) -> Result<Self> {
        let first = vectors.first().ok_or_else(|| {
            UstError::InvalidInput("batch must contain at least one vector".into())
        })?;
        let dim = first.dim();
        let mut data = Vec::with_capacity(dim * vectors.len());
        for (i, v) in vectors.iter().enumerate() {
            if v.dim() != dim {
                return Err(UstError::InvalidDimension(format!(
                    "vector {i} has dim {}, expected {dim}",
                    v.dim()
                )));
            }
            data.extend_from_slice(v.as_slice());
        }
        Ok(VectorBatch { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn row(&self, i: usize) -> Option<&[f64]> {
        self.data.get(i * self.dim..(i + 1) * self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Splits into consecutive sub-batches of at most `size` rows.
    pub fn chunks(&self, size: usize) -> impl Iterator<Item = VectorBatch> + '_ {
        let size = size.max(1);
        self.data.chunks(size * self.dim).map(|c| VectorBatch {
            dim: self.dim,
            data: c.to_vec(),
        })
    }
}

/// Running mean and scatter over every vector absorbed so far.
#[derive(Clone, Debug)]
pub struct StreamingEstimator {
    dim: usize,
    n: u64,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl StreamingEstimator {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(UstError::InvalidDimension(
                "estimator dimension must be positive".into(),
            ));
        }
        Ok(StreamingEstimator {
            dim,
            n: 0,
            mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn scatter(&self) -> &DMatrix<f64> {
        &self.scatter
    }

    /// Absorbs a batch, merging its statistics into the running state.
    pub fn update(&mut self, batch: &VectorBatch) -> Result<()> {
        if batch.dim() != self.dim {
            return Err(UstError::InvalidDimension(format!(
                "batch dim {} does not match estimator dim {}",
                batch.dim(),
                self.dim
            )));
        }
        if let Some(i) = batch.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(UstError::InvalidData(format!(
                "vector {} entry {} is not finite",
                i / self.dim,
                i % self.dim
            )));
        }

        let m = batch.count();
        let mut batch_mean = DVector::zeros(self.dim);
        for row in batch.rows() {
            for (acc, v) in batch_mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        batch_mean /= m as f64;

        let mut batch_scatter = if m > 1 {
            let centered = DMatrix::from_fn(m, self.dim, |r, c| {
                batch.as_slice()[r * self.dim + c] - batch_mean[c]
            });
            centered.tr_mul(&centered)
        } else {
            DMatrix::zeros(self.dim, self.dim)
        };

        let n = self.n as f64;
        let mf = m as f64;
        let total = n + mf;
        let delta = &batch_mean - &self.mean;

        self.mean.axpy(mf / total, &delta, 1.0);
        batch_scatter += &self.scatter;
        if self.n > 0 {
            batch_scatter.ger(n * mf / total, &delta, &delta, 1.0);
        }
        symmetrize_in_place(&mut batch_scatter);
        self.scatter = batch_scatter;
        self.n += m as u64;
        Ok(())
    }

    /// Sample covariance `scatter / (n - 1)`, repaired onto the PSD cone.
    pub fn finalize(&self, label: impl Into<String>) -> Result<GaussianStyleModel> {
        if self.n < 2 {
            return Err(UstError::InsufficientData(format!(
                "need at least 2 vectors to estimate a covariance, have {}",
                self.n
            )));
        }
        let cov = SymMatrix::from_matrix_unchecked(&self.scatter / (self.n - 1) as f64);
        Ok(GaussianStyleModel {
            label: label.into(),
            n: self.n,
            mean: self.mean.as_slice().to_vec(),
            covariance: make_psd(&cov)?,
        })
    }
}

fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// A labelled Gaussian over style vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStyleModel {
    label: String,
    n: u64,
    mean: Vec<f64>,
    covariance: SymMatrix,
}

impl GaussianStyleModel {
    /// Builds a model from explicit parameters. The covariance must be PSD
    /// up to [`DEFAULT_CLAMP_TOL`]; it is stored after PSD repair.
    pub fn new(
        label: impl Into<String>,
        n: u64,
        mean: Vec<f64>,
        covariance: SymMatrix,
    ) -> Result<Self> {
        if n < 2 {
            return Err(UstError::InsufficientData(format!(
                "model needs n >= 2 observations, got {n}"
            )));
        }
        if mean.len() != covariance.dim() {
            return Err(UstError::InvalidDimension(format!(
                "mean has dim {}, covariance is {}x{}",
                mean.len(),
                covariance.dim(),
                covariance.dim()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(UstError::InvalidData("model mean is not finite".into()));
        }
        check_psd_spectrum(&sym_eigen(&covariance)?, DEFAULT_CLAMP_TOL)?;
        Ok(GaussianStyleModel {
            label: label.into(),
            n,
            mean,
            covariance: make_psd(&covariance)?,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &SymMatrix {
        &self.covariance
    }

    /// Serialises to the `USTM` binary layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(32 + self.label.len() + 8 * dim * (dim + 1));
        out.extend_from_slice(MODEL_MAGIC);
        put_u32(&mut out, MODEL_VERSION);
        put_u32(&mut out, self.label.len() as u32);
        out.extend_from_slice(self.label.as_bytes());
        put_u64(&mut out, dim as u64);
        put_u64(&mut out, self.n);
        put_f64s(&mut out, &self.mean);
        put_f64s(&mut out, &self.covariance.to_row_major());
        out
    }

    /// Parses the `USTM` binary layout. The stored covariance is taken as is
    /// (only symmetry and finiteness are checked) so that loading is exact.
    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(buf, "USTM model");
        r.expect_magic(MODEL_MAGIC)?;
        r.expect_version(MODEL_VERSION)?;
        let label_len = r.u32()? as usize;
        let label = std::str::from_utf8(r.take(label_len)?)
            .map_err(|e| UstError::Format(format!("USTM model: label is not UTF-8: {e}")))?
            .to_string();
        let dim = r.len()?;
        let n = r.u64()?;
        if dim == 0 {
            return Err(UstError::Format("USTM model: dim is zero".into()));
        }
        let cells = dim.checked_mul(dim).ok_or_else(|| r.overflow())?;
        let mean = r.f64_vec(dim)?;
        let cov = r.f64_vec(cells)?;
        r.finish()?;
        if n < 2 {
            return Err(UstError::Format(format!("USTM model: n = {n} is below 2")));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(UstError::Format("USTM model: mean is not finite".into()));
        }
        let covariance = SymMatrix::from_row_slice(dim, &cov)
            .map_err(|e| UstError::Format(format!("USTM model: covariance: {e}")))?;
        Ok(GaussianStyleModel {
            label,
            n,
            mean,
            covariance,
        })
    }
}

const MODEL_MAGIC: &[u8; 4] = b"USTM";
const MODEL_VERSION: u32 = 1;

pub fn save_model(model: &GaussianStyleModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<GaussianStyleModel> {
    GaussianStyleModel::from_bytes(&fs::read(path)?)
}

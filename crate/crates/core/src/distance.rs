//! Statistical distances between Gaussian style models and the pairwise
//! distance matrix built from them.
//!
//! The principal metric is the 2-Wasserstein distance, whose square between
//! `N(mu_a, S_a)` and `N(mu_b, S_b)` is
//!
//! ```text
//! |mu_a - mu_b|^2 + tr(S_a) + tr(S_b) - 2 tr((S_a^1/2 S_b S_a^1/2)^1/2)
//! ```
//!
//! It stays finite for rank-deficient covariances. Kullback-Leibler and
//! Bhattacharyya are provided for comparison and refuse degenerate inputs.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Result, UstError};
use crate::linalg::{check_psd_spectrum, psd_sqrt, sym_eigen, SymMatrix, DEFAULT_CLAMP_TOL};
use crate::model::GaussianStyleModel;

/// Largest eigenvalue ratio accepted when inverting a covariance.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative size of a negative covariance residue that is still treated as
/// round-off.
const RESIDUE_TOL: f64 = 1e-9;

fn check_dims(a: &GaussianStyleModel, b: &GaussianStyleModel) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(UstError::InvalidDimension(format!(
            "`{}` has dim {} but `{}` has dim {}",
            a.label(),
            a.dim(),
            b.label(),
            b.dim()
        )));
    }
    Ok(())
}

fn mean_gap(a: &GaussianStyleModel, b: &GaussianStyleModel) -> DVector<f64> {
    DVector::from_iterator(a.dim(), a.mean().iter().zip(b.mean()).map(|(x, y)| x - y))
}

/// Squared 2-Wasserstein distance between two Gaussian models.
pub fn w2_squared(a: &GaussianStyleModel, b: &GaussianStyleModel) -> Result<f64> {
    check_dims(a, b)?;
    if identical(a, b) {
        return Ok(0.0);
    }
    let root_a = psd_sqrt(a.covariance(), DEFAULT_CLAMP_TOL)?;
    w2_squared_with_root(a, &root_a, b)
}

fn identical(a: &GaussianStyleModel, b: &GaussianStyleModel) -> bool {
    a.mean() == b.mean() && a.covariance() == b.covariance()
}

/// [`w2_squared`] given `root_a = psd_sqrt(a.covariance())`, so callers
/// comparing one model against many pay for that root once.
fn w2_squared_with_root(
    a: &GaussianStyleModel,
    root_a: &SymMatrix,
    b: &GaussianStyleModel,
) -> Result<f64> {
    if identical(a, b) {
        return Ok(0.0);
    }
    let gap = mean_gap(a, b).norm_squared();

    let sa = a.covariance();
    let sb = b.covariance();
    let inner = root_a.as_matrix() * sb.as_matrix() * root_a.as_matrix();
    let inner = SymMatrix::symmetrize(&inner)?;
    let eig = sym_eigen(&inner)?;
    check_psd_spectrum(&eig, DEFAULT_CLAMP_TOL)?;
    let cross: f64 = eig.sqrt_eigenvalues().sum();

    let traces = sa.trace() + sb.trace();
    let mut bures = traces - 2.0 * cross;
    if bures < 0.0 {
        if bures < -RESIDUE_TOL * traces {
            return Err(UstError::NumericalFailure(format!(
                "negative covariance term {bures:e} between `{}` and `{}`",
                a.label(),
                b.label()
            )));
        }
        bures = 0.0;
    }
    Ok(gap + bures)
}

/// 2-Wasserstein distance, the square root of [`w2_squared`].
pub fn w2(a: &GaussianStyleModel, b: &GaussianStyleModel) -> Result<f64> {
    w2_squared(a, b).map(f64::sqrt)
}

struct Inverted {
    inverse: DMatrix<f64>,
    log_det: f64,
}

fn invert_covariance(cov: &SymMatrix, label: &str) -> Result<Inverted> {
    let eig = sym_eigen(cov)?;
    let max = eig.max_eigenvalue();
    let min = eig.min_eigenvalue();
    if max <= 0.0 || min <= max / MAX_CONDITION {
        return Err(UstError::DegenerateModel(format!(
            "covariance of `{label}` is singular or ill-conditioned \
             (eigenvalues in [{min:e}, {max:e}], condition cap {MAX_CONDITION:e})"
        )));
    }
    Ok(Inverted {
        inverse: eig.reconstruct_with(f64::recip),
        log_det: eig.eigenvalues.iter().map(|l| l.ln()).sum(),
    })
}

fn log_det(cov: &SymMatrix, label: &str) -> Result<f64> {
    invert_covariance(cov, label).map(|i| i.log_det)
}

/// `KL(a || b)` between Gaussian models. Asymmetric.
pub fn kl_divergence(a: &GaussianStyleModel, b: &GaussianStyleModel) -> Result<f64> {
    check_dims(a, b)?;
    let inv_b = invert_covariance(b.covariance(), b.label())?;
    let log_det_a = log_det(a.covariance(), a.label())?;
    let gap = mean_gap(b, a);
    let trace_term = (&inv_b.inverse * a.covariance().as_matrix()).trace();
    let quad = gap.dot(&(&inv_b.inverse * &gap));
    let kl = 0.5 * (trace_term + quad - a.dim() as f64 + inv_b.log_det - log_det_a);
    Ok(kl.max(0.0))
}

/// Bhattacharyya distance between Gaussian models.
pub fn bhattacharyya(a: &GaussianStyleModel, b: &GaussianStyleModel) -> Result<f64> {
    check_dims(a, b)?;
    let log_det_a = log_det(a.covariance(), a.label())?;
    let log_det_b = log_det(b.covariance(), b.label())?;
    let avg = (a.covariance().as_matrix() + b.covariance().as_matrix()) * 0.5;
    let avg_label = format!("mean of `{}` and `{}`", a.label(), b.label());
    let inv_avg = invert_covariance(&SymMatrix::symmetrize(&avg)?, &avg_label)?;
    let gap = mean_gap(a, b);
    let quad = gap.dot(&(&inv_avg.inverse * &gap));
    let d = quad / 8.0 + 0.5 * (inv_avg.log_det - 0.5 * (log_det_a + log_det_b));
    Ok(d.max(0.0))
}

/// Which distance a [`DistanceMatrix`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    W2,
    W2Squared,
    Kl,
    Bhattacharyya,
}

impl Metric {
    pub fn id(self) -> &'static str {
        match self {
            Metric::W2 => "W2",
            Metric::W2Squared => "W2_SQUARED",
            Metric::Kl => "KL",
            Metric::Bhattacharyya => "BHATTACHARYYA",
        }
    }

    pub fn is_symmetric(self) -> bool {
        !matches!(self, Metric::Kl)
    }

    pub fn evaluate(self, a: &GaussianStyleModel, b: &GaussianStyleModel) -> Result<f64> {
        match self {
            Metric::W2 => w2(a, b),
            Metric::W2Squared => w2_squared(a, b),
            Metric::Kl => kl_divergence(a, b),
            Metric::Bhattacharyya => bhattacharyya(a, b),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Metric {
    type Err = UstError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "W2" => Ok(Metric::W2),
            "W2_SQUARED" => Ok(Metric::W2Squared),
            "KL" => Ok(Metric::Kl),
            "BHATTACHARYYA" => Ok(Metric::Bhattacharyya),
            other => Err(UstError::Format(format!("unknown metric id `{other}`"))),
        }
    }
}

/// Labelled square matrix of pairwise distances, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
    metric: Metric,
}

impl DistanceMatrix {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Distance between two labels, if both are present.
    pub fn between(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.get(self.index_of(a)?, self.index_of(b)?))
    }

    /// Writes the matrix as CSV preceded by a `# metric=...` comment line.
    /// Values carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# metric={}", self.metric.id())?;
        let mut w = csv::Writer::from_writer(out);
        let header = std::iter::once("").chain(self.labels.iter().map(String::as_str));
        w.write_record(header).map_err(csv_err)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut record = vec![label.clone()];
            record.extend(self.row(i).iter().map(|v| format!("{v:.16e}")));
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let metric: Metric = first
            .trim_end()
            .strip_prefix("# metric=")
            .ok_or_else(|| UstError::Format("distance CSV: missing `# metric=` line".into()))?
            .parse()?;

        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(reader);
        let mut records = r.records();
        let header = records
            .next()
            .ok_or_else(|| UstError::Format("distance CSV: missing header row".into()))?
            .map_err(csv_err)?;
        let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, rec) in records.enumerate() {
            let rec = rec.map_err(csv_err)?;
            if i >= n || rec.len() != n + 1 || rec.get(0) != Some(labels[i].as_str()) {
                return Err(UstError::Format(format!(
                    "distance CSV: row {} does not match the header",
                    i + 1
                )));
            }
            for cell in rec.iter().skip(1) {
                values.push(cell.parse::<f64>().map_err(|e| {
                    UstError::Format(format!("distance CSV: bad value `{cell}`: {e}"))
                })?);
            }
        }
        if values.len() != n * n {
            return Err(UstError::Format(
                "distance CSV: matrix is not square".into(),
            ));
        }
        Ok(DistanceMatrix {
            labels,
            values,
            metric,
        })
    }
}

fn csv_err(e: csv::Error) -> UstError {
    UstError::Format(format!("distance CSV: {e}"))
}

/// Computes all pairwise distances between `models`.
///
/// For symmetric metrics each unordered pair is evaluated once, with the
/// lexicographically smaller label as first argument, and mirrored, so the
/// result does not depend on the order of `models`. Pairs are evaluated in
/// parallel; the output is independent of scheduling.
pub fn distance_matrix(models: &[GaussianStyleModel], metric: Metric) -> Result<DistanceMatrix> {
    if models.len() < 2 {
        return Err(UstError::InvalidInput(format!(
            "distance matrix needs at least 2 models, got {}",
            models.len()
        )));
    }
    let mut seen = HashSet::new();
    for m in models {
        if !seen.insert(m.label()) {
            return Err(UstError::LabelCollision(m.label().to_string()));
        }
    }
    let dim = models[0].dim();
    if let Some(m) = models.iter().find(|m| m.dim() != dim) {
        return Err(UstError::InvalidDimension(format!(
            "`{}` has dim {}, expected {dim}",
            m.label(),
            m.dim()
        )));
    }

    let n = models.len();
    let pairs: Vec<(usize, usize)> = if metric.is_symmetric() {
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| {
                if models[i].label() <= models[j].label() {
                    (i, j)
                } else {
                    (j, i)
                }
            })
            .collect()
    } else {
        (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect()
    };

    // W2 needs the square root of each first argument's covariance; compute
    // it once per model. A model whose root fails falls back to the plain
    // pairwise call so the error is reported against a pair.
    let roots: Vec<Option<SymMatrix>> = match metric {
        Metric::W2 | Metric::W2Squared => models
            .par_iter()
            .map(|m| psd_sqrt(m.covariance(), DEFAULT_CLAMP_TOL).ok())
            .collect(),
        _ => vec![None; n],
    };
    let evaluate = |i: usize, j: usize| -> Result<f64> {
        let (a, b) = (&models[i], &models[j]);
        match (&roots[i], metric) {
            (Some(root), Metric::W2Squared) => w2_squared_with_root(a, root, b),
            (Some(root), Metric::W2) => w2_squared_with_root(a, root, b).map(f64::sqrt),
            _ => metric.evaluate(a, b),
        }
    };

    let results: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            evaluate(i, j).map_err(|e| UstError::Pair {
                a: models[i].label().to_string(),
                b: models[j].label().to_string(),
                source: Box::new(e),
            })
        })
        .collect();

    let mut values = vec![0.0; n * n];
    for (&(i, j), r) in pairs.iter().zip(results) {
        let v = r?;
        values[i * n + j] = v;
        if metric.is_symmetric() {
            values[j * n + i] = v;
        }
    }
    Ok(DistanceMatrix {
        labels: models.iter().map(|m| m.label().to_string()).collect(),
        values,
        metric,
    })
}

/// The `k` labels closest to `label` (excluding itself), nearest first.
/// Ties are broken by label order.
pub fn nearest_neighbors(
    matrix: &DistanceMatrix,
    label: &str,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    let i = matrix
        .index_of(label)
        .ok_or_else(|| UstError::NotFound(label.to_string()))?;
    if k == 0 || k >= matrix.len() {
        return Err(UstError::InvalidInput(format!(
            "k must be in 1..{}, got {k}",
            matrix.len()
        )));
    }
    let mut others: Vec<(String, f64)> = matrix
        .labels()
        .iter()
        .zip(matrix.row(i))
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, (l, d))| (l.clone(), *d))
        .collect();
    others.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    others.truncate(k);
    Ok(others)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(label: &str, mean: &[f64], cov: &[f64]) -> GaussianStyleModel {
        let d = mean.len();
        GaussianStyleModel::new(
            label,
            100,
            mean.to_vec(),
            SymMatrix::from_row_slice(d, cov).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn matrix_entries_match_direct_calls_bitwise() {
        let models = [
            model("b", &[0.0, 1.0], &[2.0, 0.5, 0.5, 1.0]),
            model("a", &[1.0, -1.0], &[1.0, 0.0, 0.0, 0.0]),
            model("c", &[0.5, 0.5], &[0.3, -0.1, -0.1, 0.4]),
        ];
        for metric in [Metric::W2, Metric::W2Squared] {
            let m = distance_matrix(&models, metric).unwrap();
            for x in &models {
                for y in &models {
                    let (p, q) = if x.label() <= y.label() {
                        (x, y)
                    } else {
                        (y, x)
                    };
                    let direct = metric.evaluate(p, q).unwrap();
                    assert_eq!(
                        m.between(x.label(), y.label()).unwrap().to_bits(),
                        direct.to_bits()
                    );
                }
            }
        }
    }

    fn diag_model(label: &str, mean: &[f64], diag: &[f64]) -> GaussianStyleModel {
        GaussianStyleModel::new(label, 100, mean.to_vec(), SymMatrix::from_diagonal(diag)).unwrap()
    }

    #[test]
    fn w2_one_dimensional() {
        let a = diag_model("a", &[0.0], &[1.0]);
        let b = diag_model("b", &[3.0], &[1.0]);
        assert_eq!(w2_squared(&a, &b).unwrap(), 9.0);
        assert_eq!(w2(&a, &b).unwrap(), 3.0);
    }

    #[test]
    fn w2_isotropic() {
        let a = diag_model("a", &[0.0, 0.0], &[1.0, 1.0]);
        let b = diag_model("b", &[0.0, 0.0], &[4.0, 4.0]);
        assert!((w2_squared(&a, &b).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn w2_identical_is_zero() {
        let a = model(
            "a",
            &[1.0, 2.0, 3.0],
            &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5],
        );
        assert_eq!(w2_squared(&a, &a).unwrap(), 0.0);
        // A bitwise copy takes the short cut; a perturbed copy goes through
        // the full computation and must still land near zero.
        let cov = a.covariance().as_matrix() * (1.0 + 1e-15);
        let b = GaussianStyleModel::new("b", 100, a.mean().to_vec(), SymMatrix::new(cov).unwrap())
            .unwrap();
        assert!(w2_squared(&a, &b).unwrap() <= 1e-12 * 3.5);
    }

    #[test]
    fn w2_with_zero_covariance() {
        let a = diag_model("a", &[0.0, 0.0], &[0.0, 0.0]);
        let b = diag_model("b", &[1.0, 0.0], &[4.0, 9.0]);
        // |mu|^2 + tr(S_b) since the cross term vanishes.
        assert!((w2_squared(&a, &b).unwrap() - 14.0).abs() < 1e-12);
        assert!((w2_squared(&b, &a).unwrap() - 14.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let a = diag_model("a", &[0.0], &[1.0]);
        let b = diag_model("b", &[0.0, 0.0], &[1.0, 1.0]);
        for metric in [
            Metric::W2,
            Metric::W2Squared,
            Metric::Kl,
            Metric::Bhattacharyya,
        ] {
            assert!(matches!(
                metric.evaluate(&a, &b),
                Err(UstError::InvalidDimension(_))
            ));
        }
    }

    #[test]
    fn kl_known_values() {
        let a = diag_model("a", &[0.0], &[1.0]);
        let b = diag_model("b", &[1.0], &[2.0]);
        // 0.5 * (1/2 + 1/2 - 1 + ln 2)
        let expected = 0.5 * 2f64.ln();
        assert!((kl_divergence(&a, &b).unwrap() - expected).abs() < 1e-14);
        assert_eq!(kl_divergence(&a, &a).unwrap(), 0.0);
        let reverse = kl_divergence(&b, &a).unwrap();
        assert!((reverse - 0.5 * (2.0 + 1.0 - 1.0 - 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn kl_rejects_degenerate() {
        let a = diag_model("full", &[0.0, 0.0], &[1.0, 1.0]);
        let b = diag_model("flat", &[0.0, 0.0], &[1.0, 0.0]);
        let err = kl_divergence(&a, &b).unwrap_err();
        assert!(matches!(err, UstError::DegenerateModel(ref m) if m.contains("flat")));
        assert!(matches!(
            kl_divergence(&b, &a),
            Err(UstError::DegenerateModel(_))
        ));
    }

    #[test]
    fn bhattacharyya_known_value_and_symmetry() {
        let a = diag_model("a", &[0.0], &[1.0]);
        let b = diag_model("b", &[2.0], &[3.0]);
        // avg var 2: 4/16 + 0.5 ln(2 / sqrt(3))
        let expected = 0.25 + 0.5 * (2.0 / 3f64.sqrt()).ln();
        let ab = bhattacharyya(&a, &b).unwrap();
        assert!((ab - expected).abs() < 1e-14);
        assert!((ab - bhattacharyya(&b, &a).unwrap()).abs() <= 1e-12);
        assert_eq!(bhattacharyya(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn bhattacharyya_rejects_degenerate_where_w2_does_not() {
        let a = diag_model("a", &[0.0, 1.0], &[1.0, 0.0]);
        let b = diag_model("b", &[1.0, 0.0], &[0.0, 2.0]);
        assert!(matches!(
            bhattacharyya(&a, &b),
            Err(UstError::DegenerateModel(_))
        ));
        assert!(w2_squared(&a, &b).unwrap().is_finite());
    }

    #[test]
    fn matrix_of_identical_models() {
        let a = diag_model("a", &[1.0, 1.0], &[1.0, 2.0]);
        let b = a.clone().with_label("b");
        let m = distance_matrix(&[a, b], Metric::W2).unwrap();
        assert!(m.row(0).iter().chain(m.row(1)).all(|v| *v == 0.0));
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(0, 1), m.get(1, 0));
    }

    #[test]
    fn matrix_input_validation() {
        let a = diag_model("a", &[1.0], &[1.0]);
        assert!(matches!(
            distance_matrix(std::slice::from_ref(&a), Metric::W2),
            Err(UstError::InvalidInput(_))
        ));
        assert!(matches!(
            distance_matrix(&[a.clone(), a.clone()], Metric::W2),
            Err(UstError::LabelCollision(_))
        ));
        let wide = diag_model("w", &[1.0, 1.0], &[1.0, 1.0]);
        assert!(matches!(
            distance_matrix(&[a, wide], Metric::W2),
            Err(UstError::InvalidDimension(_))
        ));
    }

    #[test]
    fn matrix_names_failing_pair() {
        let good = diag_model("good", &[0.0, 0.0], &[1.0, 1.0]);
        let flat = diag_model("flat", &[0.0, 0.0], &[1.0, 0.0]);
        match distance_matrix(&[good, flat], Metric::Kl) {
            Err(UstError::Pair { a, b, source }) => {
                assert_eq!((a.as_str(), b.as_str()), ("good", "flat"));
                assert!(matches!(*source, UstError::DegenerateModel(_)));
            }
            other => panic!("expected pair error, got {other:?}"),
        }
    }

    #[test]
    fn kl_matrix_is_directional() {
        let a = diag_model("a", &[0.0], &[1.0]);
        let b = diag_model("b", &[1.0], &[2.0]);
        let m = distance_matrix(&[a.clone(), b.clone()], Metric::Kl).unwrap();
        assert_eq!(m.get(0, 1), kl_divergence(&a, &b).unwrap());
        assert_eq!(m.get(1, 0), kl_divergence(&b, &a).unwrap());
        assert_ne!(m.get(0, 1), m.get(1, 0));
    }

    #[test]
    fn csv_round_trip_and_layout() {
        let models = [
            diag_model("Claude Monet", &[0.0], &[1.0]),
            diag_model("Camille, Pissarro", &[3.0], &[2.0]),
            diag_model("c", &[-1.0], &[0.5]),
        ];
        let m = distance_matrix(&models, Metric::W2Squared).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# metric=W2_SQUARED"));
        assert_eq!(lines.next(), Some(",Claude Monet,\"Camille, Pissarro\",c"));
        let back = DistanceMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(DistanceMatrix::read_csv("a,b\n".as_bytes()).is_err());
        assert!(DistanceMatrix::read_csv("# metric=W3\n,a\na,0\n".as_bytes()).is_err());
        assert!(DistanceMatrix::read_csv("# metric=W2\n,a,b\na,0,1\n".as_bytes()).is_err());
        assert!(DistanceMatrix::read_csv("# metric=W2\n,a\nb,0\n".as_bytes()).is_err());
    }

    #[test]
    fn neighbours() {
        let models = [
            diag_model("a", &[0.0], &[1.0]),
            diag_model("b", &[1.0], &[1.0]),
            diag_model("c", &[-1.0], &[1.0]),
            diag_model("d", &[5.0], &[1.0]),
        ];
        let m = distance_matrix(&models, Metric::W2).unwrap();
        let nn = nearest_neighbors(&m, "a", 3).unwrap();
        let names: Vec<_> = nn.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(names, ["b", "c", "d"]);
        assert_eq!(nearest_neighbors(&m, "d", 1).unwrap()[0].0, "b");
        assert!(matches!(
            nearest_neighbors(&m, "zz", 1),
            Err(UstError::NotFound(_))
        ));
        assert!(nearest_neighbors(&m, "a", 0).is_err());
        assert!(nearest_neighbors(&m, "a", 4).is_err());

        let pair = distance_matrix(&models[..2], Metric::W2).unwrap();
        assert_eq!(nearest_neighbors(&pair, "b", 1).unwrap()[0].0, "a");
    }
}

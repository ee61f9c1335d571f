//! Geometry of symmetric positive definite matrices under the Log-Euclidean
//! and Log-Cholesky metrics.
//!
//! Both metrics flatten the manifold through a log map into a vector space
//! (symmetric matrices for Log-Euclidean, lower-triangular matrices with a
//! log-diagonal for Log-Cholesky). Geodesic distance is the Frobenius
//! distance between images and the Fréchet mean is the inverse map applied
//! to the arithmetic mean of images, so no iterative solver is needed.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute symmetry tolerance accepted at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Smallest admissible eigenvalue ratio when taking a matrix logarithm.
pub const MIN_EIGEN_RATIO: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    LogEuclidean,
    LogCholesky,
}

impl MetricKind {
    pub fn short_name(self) -> &'static str {
        match self {
            MetricKind::LogEuclidean => "le",
            MetricKind::LogCholesky => "lc",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (m[(i, j)] - m[(j, i)]).abs();
            if gap > SYMMETRY_TOL {
                return Err(Error::NotSymmetric { i, j, gap });
            }
        }
    }
    Ok(())
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// A validated symmetric positive definite matrix.
///
/// Construction runs a Cholesky factorization; the factor is kept since the
/// Log-Cholesky map needs it anyway.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    entries: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl SpdMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_square(&entries)?;
        check_finite(&entries)?;
        check_symmetric(&entries)?;
        let factor = entries
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .unpack();
        if factor.diagonal().iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { entries, factor })
    }

    pub fn from_row_slice(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
            factor: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Builds `L·Lᵀ` from a lower-triangular factor with positive diagonal.
    fn from_factor(factor: DMatrix<f64>) -> Result<Self> {
        check_finite(&factor)?;
        if factor.diagonal().iter().any(|d| !(*d > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        let mut entries = &factor * factor.transpose();
        symmetrize(&mut entries);
        check_finite(&entries)?;
        Ok(Self { entries, factor })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.factor
    }
}

/// A symmetric matrix in the tangent space at the identity; the image of the
/// Log-Euclidean map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricTangent {
    entries: DMatrix<f64>,
}

impl SymmetricTangent {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_square(&entries)?;
        check_finite(&entries)?;
        check_symmetric(&entries)?;
        Ok(Self { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// Image of the Log-Cholesky map: the strictly lower part of the Cholesky
/// factor and the logarithm of its diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CholeskyImage {
    strict_lower: DMatrix<f64>,
    log_diag: DVector<f64>,
}

impl CholeskyImage {
    /// Entries on or above the diagonal of `strict_lower` must be exactly zero.
    pub fn new(strict_lower: DMatrix<f64>, log_diag: DVector<f64>) -> Result<Self> {
        let dim = check_square(&strict_lower)?;
        check_dims(dim, log_diag.len())?;
        check_finite(&strict_lower)?;
        if log_diag.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for i in 0..dim {
            for j in i..dim {
                if strict_lower[(i, j)] != 0.0 {
                    return Err(Error::Contract(format!(
                        "strict_lower has nonzero entry at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            strict_lower,
            log_diag,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            strict_lower: DMatrix::zeros(dim, dim),
            log_diag: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.log_diag.len()
    }

    pub fn strict_lower(&self) -> &DMatrix<f64> {
        &self.strict_lower
    }

    pub fn log_diag(&self) -> &DVector<f64> {
        &self.log_diag
    }

    /// Rebuilds the Cholesky factor `⌊L⌋ + exp(log_diag)`.
    pub fn factor(&self) -> DMatrix<f64> {
        let mut l = self.strict_lower.clone();
        for (i, v) in self.log_diag.iter().enumerate() {
            l[(i, i)] = v.exp();
        }
        l
    }
}

/// An element of the flat log-domain of either metric.
///
/// Images of the same metric form a vector space: they can be summed,
/// scaled, and compared with the Frobenius norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum LogImage {
    LogEuclidean(SymmetricTangent),
    LogCholesky(CholeskyImage),
}

impl LogImage {
    pub fn zeros(metric: MetricKind, dim: usize) -> Self {
        match metric {
            MetricKind::LogEuclidean => LogImage::LogEuclidean(SymmetricTangent::zeros(dim)),
            MetricKind::LogCholesky => LogImage::LogCholesky(CholeskyImage::zeros(dim)),
        }
    }

    pub fn metric(&self) -> MetricKind {
        match self {
            LogImage::LogEuclidean(_) => MetricKind::LogEuclidean,
            LogImage::LogCholesky(_) => MetricKind::LogCholesky,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LogImage::LogEuclidean(s) => s.dim(),
            LogImage::LogCholesky(c) => c.dim(),
        }
    }

    fn check_compatible(&self, other: &LogImage) -> Result<()> {
        if self.metric() != other.metric() {
            return Err(Error::MetricMismatch);
        }
        check_dims(self.dim(), other.dim())
    }

    pub fn add_assign(&mut self, other: &LogImage) -> Result<()> {
        self.check_compatible(other)?;
        match (self, other) {
            (LogImage::LogEuclidean(a), LogImage::LogEuclidean(b)) => a.entries += &b.entries,
            (LogImage::LogCholesky(a), LogImage::LogCholesky(b)) => {
                a.strict_lower += &b.strict_lower;
                a.log_diag += &b.log_diag;
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &LogImage) -> Result<()> {
        self.check_compatible(other)?;
        match (self, other) {
            (LogImage::LogEuclidean(a), LogImage::LogEuclidean(b)) => a.entries -= &b.entries,
            (LogImage::LogCholesky(a), LogImage::LogCholesky(b)) => {
                a.strict_lower -= &b.strict_lower;
                a.log_diag -= &b.log_diag;
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> LogImage {
        match self {
            LogImage::LogEuclidean(s) => LogImage::LogEuclidean(SymmetricTangent {
                entries: &s.entries * factor,
            }),
            LogImage::LogCholesky(c) => LogImage::LogCholesky(CholeskyImage {
                strict_lower: &c.strict_lower * factor,
                log_diag: &c.log_diag * factor,
            }),
        }
    }

    /// Frobenius distance in the log domain, which is the geodesic distance
    /// between the corresponding SPD matrices.
    pub fn distance(&self, other: &LogImage) -> Result<f64> {
        self.check_compatible(other)?;
        let sq = match (self, other) {
            (LogImage::LogEuclidean(a), LogImage::LogEuclidean(b)) => {
                frobenius_sq_diff(&a.entries, &b.entries)
            }
            (LogImage::LogCholesky(a), LogImage::LogCholesky(b)) => {
                frobenius_sq_diff(&a.strict_lower, &b.strict_lower)
                    + a.log_diag
                        .iter()
                        .zip(b.log_diag.iter())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
            }
            _ => unreachable!(),
        };
        Ok(sq.sqrt())
    }

    /// Maps the image back onto the manifold.
    pub fn to_spd(&self) -> Result<SpdMatrix> {
        match self {
            LogImage::LogEuclidean(s) => matrix_exp(s),
            LogImage::LogCholesky(c) => SpdMatrix::from_factor(c.factor()),
        }
    }
}

fn frobenius_sq_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

fn spectral_map(eigen: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let u = &eigen.eigenvectors;
    let mapped = DMatrix::from_diagonal(&eigen.eigenvalues.map(f));
    let mut out = u * mapped * u.transpose();
    symmetrize(&mut out);
    out
}

/// Log-Euclidean logarithm `U·ln(Σ)·Uᵀ` via a symmetric eigendecomposition.
pub fn matrix_log_le(p: &SpdMatrix) -> Result<SymmetricTangent> {
    let eigen = SymmetricEigen::new(p.entries.clone());
    let max = eigen.eigenvalues.max();
    let min = eigen.eigenvalues.min();
    if !(min > MIN_EIGEN_RATIO * max) {
        return Err(Error::IllConditioned { ratio: min / max });
    }
    let entries = spectral_map(&eigen, f64::ln);
    check_finite(&entries)?;
    Ok(SymmetricTangent { entries })
}

/// Matrix exponential of a symmetric matrix, evaluated on its eigenvalues.
pub fn matrix_exp(s: &SymmetricTangent) -> Result<SpdMatrix> {
    check_finite(&s.entries)?;
    let eigen = SymmetricEigen::new(s.entries.clone());
    let entries = spectral_map(&eigen, f64::exp);
    SpdMatrix::new(entries)
}

/// Lower-triangular `L` with positive diagonal such that `L·Lᵀ = P`.
pub fn cholesky_factor(p: &SpdMatrix) -> DMatrix<f64> {
    p.factor.clone()
}

pub fn log_cholesky_map(p: &SpdMatrix) -> CholeskyImage {
    let dim = p.dim();
    let mut strict_lower = p.factor.clone();
    let mut log_diag = DVector::zeros(dim);
    for i in 0..dim {
        log_diag[i] = strict_lower[(i, i)].ln();
        for j in i..dim {
            strict_lower[(i, j)] = 0.0;
        }
    }
    CholeskyImage {
        strict_lower,
        log_diag,
    }
}

pub fn log_image(metric: MetricKind, p: &SpdMatrix) -> Result<LogImage> {
    Ok(match metric {
        MetricKind::LogEuclidean => LogImage::LogEuclidean(matrix_log_le(p)?),
        MetricKind::LogCholesky => LogImage::LogCholesky(log_cholesky_map(p)),
    })
}

/// Geodesic distance between two SPD matrices.
pub fn dist(metric: MetricKind, p1: &SpdMatrix, p2: &SpdMatrix) -> Result<f64> {
    check_dims(p1.dim(), p2.dim())?;
    log_image(metric, p1)?.distance(&log_image(metric, p2)?)
}

/// Closed-form Fréchet mean.
pub fn frechet_mean(metric: MetricKind, ps: &[SpdMatrix]) -> Result<SpdMatrix> {
    let first = ps
        .first()
        .ok_or_else(|| Error::Contract("Fréchet mean of an empty set".into()))?;
    let mut sum = LogImage::zeros(metric, first.dim());
    for p in ps {
        check_dims(first.dim(), p.dim())?;
        sum.add_assign(&log_image(metric, p)?)?;
    }
    mean_from_log_sum(&sum, ps.len())
}

/// Fréchet mean from an accumulated sum of `n` log-images.
pub fn mean_from_log_sum(log_sum: &LogImage, n: usize) -> Result<SpdMatrix> {
    if n == 0 {
        return Err(Error::Contract("mean over zero matrices".into()));
    }
    log_sum.scaled(1.0 / n as f64).to_spd()
}

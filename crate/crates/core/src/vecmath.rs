//! Dense vector similarity and distance primitives, element-wise powers, and
//! the covariance model behind Mahalanobis distance. All arithmetic is `f64`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_POWER: u32 = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VecError {
    #[error("dimension mismatch ({0} vs {1})")]
    DimMismatch(usize, usize),
    #[error("cosine is undefined for a zero vector")]
    ZeroVector,
    #[error("power {0} outside 1..={MAX_POWER}")]
    PowerOutOfRange(u32),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("covariance is singular even after ridge {0}")]
    SingularAfterRidge(f64),
    #[error("non-finite value in input")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEmbedding {
    pub id: String,
    pub values: Vec<f64>,
}

impl SentenceEmbedding {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn same_dim(a: &[f64], b: &[f64]) -> Result<(), VecError> {
    if a.len() != b.len() {
        return Err(VecError::DimMismatch(a.len(), b.len()));
    }
    Ok(())
}

/// Raises every coordinate to the power `k` (1..=10).
pub fn pow_elementwise(v: &SentenceEmbedding, k: u32) -> Result<SentenceEmbedding, VecError> {
    Ok(SentenceEmbedding {
        id: v.id.clone(),
        values: pow_values(&v.values, k)?,
    })
}

pub fn pow_values(v: &[f64], k: u32) -> Result<Vec<f64>, VecError> {
    if !(1..=MAX_POWER).contains(&k) {
        return Err(VecError::PowerOutOfRange(k));
    }
    Ok(v.iter().map(|x| x.powi(k as i32)).collect())
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64, VecError> {
    same_dim(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, VecError> {
    let d = dot(a, b)?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(VecError::ZeroVector);
    }
    let c = d / (na * nb);
    if !c.is_finite() {
        return Err(VecError::NonFinite);
    }
    Ok(c.clamp(-1.0, 1.0))
}

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64, VecError> {
    same_dim(a, b)?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

pub fn manhattan(a: &[f64], b: &[f64]) -> Result<f64, VecError> {
    same_dim(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

/// Covariance matrix (ridge already added) with its verified inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    dim: usize,
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    ridge: f64,
}

/// Largest tolerated `|Σ⁻¹Σ - I|` entry.
pub const INVERSE_TOLERANCE: f64 = 1e-6;

impl CovarianceModel {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: DMatrix::identity(dim, dim),
            inverse: DMatrix::identity(dim, dim),
            ridge: 0.0,
        }
    }

    /// Adds `ridge·I` to a symmetric matrix and inverts it.
    pub fn from_matrix(matrix: DMatrix<f64>, ridge: f64) -> Result<Self, VecError> {
        if !matrix.is_square() {
            return Err(VecError::DimMismatch(matrix.nrows(), matrix.ncols()));
        }
        if matrix.iter().any(|v| !v.is_finite()) || !ridge.is_finite() {
            return Err(VecError::NonFinite);
        }
        let dim = matrix.nrows();
        let mut matrix = matrix;
        for i in 0..dim {
            matrix[(i, i)] += ridge;
        }
        let inverse = matrix
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(VecError::SingularAfterRidge(ridge))?;
        // Cholesky inverse is symmetric only up to rounding.
        let inverse = (&inverse + inverse.transpose()) * 0.5;
        let residual = &inverse * &matrix - DMatrix::<f64>::identity(dim, dim);
        if residual.iter().any(|v| !(v.abs() <= INVERSE_TOLERANCE)) {
            return Err(VecError::SingularAfterRidge(ridge));
        }
        Ok(Self {
            dim,
            matrix,
            inverse,
            ridge,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }
}

/// Unbiased sample covariance (divides by `n - 1`) of equal-length rows.
pub fn sample_covariance<'a, I>(rows: I) -> Result<DMatrix<f64>, VecError>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let rows: Vec<&[f64]> = rows.into_iter().collect();
    let n = rows.len();
    if n < 2 {
        return Err(VecError::TooFewSamples(n));
    }
    let dim = rows[0].len();
    let mut mean = vec![0.0; dim];
    for row in &rows {
        same_dim(row, &mean)?;
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, dim, |r, c| rows[r][c] - mean[c]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    // exact symmetry
    Ok((&cov + cov.transpose()) * 0.5)
}

/// Ridge used when none is given: `1e-3 · trace(Σ) / dim`.
pub fn default_ridge(cov: &DMatrix<f64>) -> f64 {
    if cov.nrows() == 0 {
        return 0.0;
    }
    1e-3 * cov.trace() / cov.nrows() as f64
}

pub fn fit_covariance(
    embs: &[SentenceEmbedding],
    ridge: f64,
) -> Result<CovarianceModel, VecError> {
    let cov = sample_covariance(embs.iter().map(|e| e.values.as_slice()))?;
    CovarianceModel::from_matrix(cov, ridge)
}

/// [`fit_covariance`] with [`default_ridge`].
pub fn fit_covariance_auto(embs: &[SentenceEmbedding]) -> Result<CovarianceModel, VecError> {
    let cov = sample_covariance(embs.iter().map(|e| e.values.as_slice()))?;
    let ridge = default_ridge(&cov);
    CovarianceModel::from_matrix(cov, ridge)
}

pub fn mahalanobis(a: &[f64], b: &[f64], cov: &CovarianceModel) -> Result<f64, VecError> {
    same_dim(a, b)?;
    if a.len() != cov.dim {
        return Err(VecError::DimMismatch(a.len(), cov.dim));
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let inv = &cov.inverse;
    let mut q = 0.0;
    for (i, di) in diff.iter().enumerate() {
        let mut row = 0.0;
        for (j, dj) in diff.iter().enumerate() {
            row += inv[(i, j)] * dj;
        }
        q += di * row;
    }
    Ok(q.max(0.0).sqrt())
}

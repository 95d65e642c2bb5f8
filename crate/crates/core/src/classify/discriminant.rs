//! Gaussian discriminant analysis with `lambda * I` covariance regularization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{softmax, ClassifyError};

pub const COVARIANCE_RIDGE: f64 = 1e-6;

fn class_rows<'a>(
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    class: usize,
) -> impl Iterator<Item = &'a Vec<f64>> {
    rows.iter()
        .zip(labels)
        .filter(move |(_, &l)| l == class)
        .map(|(r, _)| r)
}

fn mean_of<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, dim: usize) -> (DVector<f64>, usize) {
    let mut sum = DVector::zeros(dim);
    let mut n = 0;
    for r in rows {
        sum += DVector::from_column_slice(r);
        n += 1;
    }
    (sum / n.max(1) as f64, n)
}

fn scatter<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, mean: &DVector<f64>) -> DMatrix<f64> {
    let dim = mean.len();
    let mut s = DMatrix::zeros(dim, dim);
    for r in rows {
        let d = DVector::from_column_slice(r) - mean;
        s += &d * d.transpose();
    }
    s
}

/// Cholesky-based inverse and log-determinant.
fn invert(cov: DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let chol = cov.cholesky()?;
    let log_det = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    Some((chol.inverse(), log_det))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Shared-covariance linear discriminant: `score_c = w_c . x + b_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

impl LdaModel {
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
    ) -> Result<Self, ClassifyError> {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut pooled = DMatrix::zeros(dim, dim);
        let mut means = Vec::with_capacity(n_classes);
        let mut priors = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            let (mu, count) = mean_of(class_rows(rows, labels, c), dim);
            pooled += scatter(class_rows(rows, labels, c), &mu);
            priors.push(count as f64 / n);
            means.push(mu);
        }
        let cov = pooled / n + DMatrix::identity(dim, dim) * COVARIANCE_RIDGE;
        let (precision, _) =
            invert(cov).ok_or(ClassifyError::SingularCovariance { class: None })?;
        let mut weights = Vec::with_capacity(n_classes);
        let mut intercepts = Vec::with_capacity(n_classes);
        for (mu, prior) in means.iter().zip(priors) {
            let w = &precision * mu;
            intercepts.push(-0.5 * mu.dot(&w) + prior.ln());
            weights.push(w.iter().copied().collect());
        }
        Ok(Self {
            weights,
            intercepts,
        })
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect();
        softmax(&logits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaClass {
    pub mean: Vec<f64>,
    pub precision: Vec<Vec<f64>>,
    pub log_det: f64,
    pub log_prior: f64,
}

/// Per-class covariance quadratic discriminant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaModel {
    pub classes: Vec<QdaClass>,
}

impl QdaModel {
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
    ) -> Result<Self, ClassifyError> {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut classes = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            let (mu, count) = mean_of(class_rows(rows, labels, c), dim);
            if count < dim + 1 {
                return Err(ClassifyError::SingularCovariance { class: Some(c) });
            }
            let cov = scatter(class_rows(rows, labels, c), &mu) / count as f64
                + DMatrix::identity(dim, dim) * COVARIANCE_RIDGE;
            let (precision, log_det) =
                invert(cov).ok_or(ClassifyError::SingularCovariance { class: Some(c) })?;
            classes.push(QdaClass {
                mean: mu.iter().copied().collect(),
                precision: to_rows(&precision),
                log_det,
                log_prior: (count as f64 / n).ln(),
            });
        }
        Ok(Self { classes })
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .classes
            .iter()
            .map(|c| {
                let d: Vec<f64> = x.iter().zip(&c.mean).map(|(a, m)| a - m).collect();
                let mahal: f64 = c
                    .precision
                    .iter()
                    .zip(&d)
                    .map(|(row, di)| di * row.iter().zip(&d).map(|(p, dj)| p * dj).sum::<f64>())
                    .sum();
                -0.5 * c.log_det - 0.5 * mahal + c.log_prior
            })
            .collect();
        softmax(&logits)
    }
}

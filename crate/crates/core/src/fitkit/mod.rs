//! Estimation primitives: linear-Gaussian regression, multinomial logistic
//! regression, two-component 1-D Gaussian mixtures and fit-quality metrics.

mod gmm;
pub mod linalg;
mod linear;
mod logistic;
mod metrics;

use thiserror::Error;

use crate::scalar::Real;

pub use gmm::{fit_gmm2, posterior_z, Gmm1D, GmmFit, GmmOptions};
pub use linear::{fit_linear, LinearGaussianModel};
pub use logistic::{fit_logistic, LogisticFit, LogisticOptions, MultinomialLogisticModel};
pub use metrics::{classification_report, regression_report, FitReport};

pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("length mismatch: {what} has {got}, expected {expected}")]
    LengthMismatch { what: String, got: usize, expected: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("need at least 2 distinct labels, found {0}")]
    TooFewClasses(usize),
}

/// Row-major design matrix whose first column is the constant intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    columns: Vec<String>,
    rows: usize,
    data: Vec<T>,
}

impl<T: Real> DesignMatrix<T> {
    /// Builds a design from encoded feature rows; the intercept is prepended.
    pub fn new(feature_names: Vec<String>, rows: &[Vec<T>]) -> Result<Self, FitError> {
        let p = feature_names.len();
        let mut data = Vec::with_capacity(rows.len() * (p + 1));
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(FitError::LengthMismatch {
                    what: format!("row {i}"),
                    got: r.len(),
                    expected: p,
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(FitError::NonFinite(format!("design row {i}")));
            }
            data.push(T::one());
            data.extend_from_slice(r);
        }
        let mut columns = Vec::with_capacity(p + 1);
        columns.push(INTERCEPT.to_string());
        columns.extend(feature_names);
        Ok(Self { columns, rows: rows.len(), data })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    /// Column count including the intercept.
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> &[T] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.n_cols().max(1))
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.rows().map(|r| r[j]).collect()
    }

    pub(crate) fn columns_owned(&self) -> Vec<Vec<T>> {
        let p = self.n_cols();
        let mut cols = vec![Vec::with_capacity(self.rows); p];
        for r in self.rows() {
            for (c, v) in cols.iter_mut().zip(r) {
                c.push(*v);
            }
        }
        cols
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

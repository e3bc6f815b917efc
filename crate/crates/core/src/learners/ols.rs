//! Least squares and ridge regression through the normal equations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `g ≈ w · s + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegressor {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearRegressor {
    pub fn predict(&self, s: &[f64]) -> Result<f64> {
        if s.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "regressor expects {} features, got {}",
                self.weights.len(),
                s.len()
            )));
        }
        Ok(self.bias + self.weights.iter().zip(s).map(|(w, x)| w * x).sum::<f64>())
    }
}

/// Solves `(XcᵀXc + ridge·I) w = Xcᵀ gc` on column-centered data, then
/// `b = mean(g) − mean(X)·w`; the intercept is never penalized.
pub fn fit_ols(s: &Matrix, g: &[f64], ridge: f64) -> Result<LinearRegressor> {
    let (p, m) = (s.rows(), s.cols());
    if g.len() != p {
        return Err(Error::DimensionMismatch(format!("{p} feature rows but {} targets", g.len())));
    }
    if p == 0 {
        return Err(Error::Empty("regression data"));
    }
    if !s.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression data"));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge must be ≥ 0, got {ridge}")));
    }
    if ridge == 0.0 && p < m + 1 {
        return Err(Error::Singular);
    }

    let xm = s.column_means();
    let gm = g.iter().sum::<f64>() / p as f64;
    let xc = DMatrix::from_fn(p, m, |i, j| s.get(i, j) - xm[j]);
    let gc = DVector::from_iterator(p, g.iter().map(|v| v - gm));

    let mut a = xc.transpose() * &xc;
    for j in 0..m {
        a[(j, j)] += ridge;
    }
    let rhs = xc.transpose() * gc;

    if ridge == 0.0 {
        let eig = SymmetricEigen::new(a.clone()).eigenvalues;
        let max = eig.iter().copied().fold(0.0, f64::max);
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if max <= 0.0 || min <= max * 1e-12 {
            return Err(Error::Singular);
        }
    }
    let w = a.cholesky().ok_or(Error::Singular)?.solve(&rhs);
    let weights: Vec<f64> = w.iter().copied().collect();
    let bias = gm - weights.iter().zip(&xm).map(|(w, x)| w * x).sum::<f64>();
    Ok(LinearRegressor { weights, bias })
}

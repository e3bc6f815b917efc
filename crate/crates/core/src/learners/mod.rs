//! Trainable models: logistic classifiers, least-squares and MLP regressors.

mod logistic;
mod mlp;
mod ols;

pub use logistic::{
    fit_logistic, fit_logistic_traced, predict_proba, LinearModel, LogisticConfig, LogisticProblem,
};
pub(crate) use logistic::softmax_in_place;
pub use mlp::{fit_mlp_regressor, Dense, MlpConfig, MlpRegressor};
pub use ols::{fit_ols, LinearRegressor};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    #[default]
    Linear,
    Mlp,
}

/// A fitted map from shift features to accuracy gap.
#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Linear(LinearRegressor),
    Mlp(MlpRegressor),
}

impl Regressor {
    pub fn fit(kind: RegressorKind, s: &Matrix, g: &[f64], ridge: f64, mlp: &MlpConfig) -> Result<Self> {
        Ok(match kind {
            RegressorKind::Linear => Regressor::Linear(fit_ols(s, g, ridge)?),
            RegressorKind::Mlp => Regressor::Mlp(fit_mlp_regressor(s, g, mlp)?),
        })
    }

    pub fn predict(&self, s: &[f64]) -> Result<f64> {
        match self {
            Regressor::Linear(r) => r.predict(s),
            Regressor::Mlp(r) => r.predict(s),
        }
    }

    pub fn kind(&self) -> RegressorKind {
        match self {
            Regressor::Linear(_) => RegressorKind::Linear,
            Regressor::Mlp(_) => RegressorKind::Mlp,
        }
    }
}

pub fn predict(regressor: &Regressor, s: &[f64]) -> Result<f64> {
    regressor.predict(s)
}

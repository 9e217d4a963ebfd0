use crate::error::Result;
use crate::lasso::{fit_l1_logistic, FitOptions, LinearModel};
use crate::matrix::FeatureMatrix;

use super::params::LogisticParams;

/// L1 logistic regression at `λ = 1 / (C · n)`.
pub fn fit_logistic(x: &FeatureMatrix, y: &[u8], params: &LogisticParams) -> Result<LinearModel> {
    params.validate()?;
    let lambda = logistic_lambda(params.c, x.n_rows());
    let opts = FitOptions {
        tol: params.tol,
        ..FitOptions::default()
    };
    fit_l1_logistic(x, y, lambda, &opts)
}

/// Penalty corresponding to inverse strength `c` on `n` rows.
pub fn logistic_lambda(c: f64, n: usize) -> f64 {
    1.0 / (c * n as f64)
}

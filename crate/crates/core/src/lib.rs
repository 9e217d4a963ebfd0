//! Explainable clinical risk prediction.
//!
//! The crate covers the whole modelling workflow for a binary clinical
//! outcome on tabular data:
//!
//! * [`cohort`]: typed cohort tables, CSV ingestion, missing-value policy,
//!   derived clinical variables, z-scoring, one-hot encoding and the
//!   stratified baseline table.
//! * [`lasso`]: L1-penalised logistic regression by coordinate descent,
//!   regularisation paths and k-fold selection of the penalty.
//! * [`learners`]: CART, random forest, second-order gradient boosting and
//!   L1 logistic regression.
//! * [`selection`]: stratified folds and AUC-scored grid search.
//! * [`evaluation`]: ROC/AUC, the DeLong paired test, decision curves and
//!   bootstrap calibration with logistic recalibration.
//! * [`explain`]: exact path-dependent TreeSHAP, interaction values and a
//!   brute-force Shapley oracle.
//! * [`synth`]: a seeded synthetic cohort generator.
//!
//! Data-parallel loops (bootstrap resamples, grid candidates, forest trees,
//! per-sample attributions) go through [`exec::Execution`]. With the
//! `parallel` feature (on by default) they run on rayon; without it, or
//! with [`exec::Execution::Sequential`], they run in order on the calling
//! thread. Both paths return identical results.

pub mod cohort;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod explain;
pub mod lasso;
pub mod learners;
pub mod matrix;
pub mod rng;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Execution;
pub use matrix::FeatureMatrix;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Logistic sigmoid.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Log-odds of a probability.
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

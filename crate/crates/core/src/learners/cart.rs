use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::rng;

use super::builder::{grow, FeatureChoice, Gini, GrowthLimits, Presorted, RowStats};
use super::params::TreeParams;
use super::tree::{Objective, TreeEnsemble};

pub(crate) fn check_training_data(x: &FeatureMatrix, y: &[u8]) -> Result<()> {
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(Error::EmptyCohort);
    }
    if x.n_rows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.n_rows(), y.len())));
    }
    if x.has_nan() {
        return Err(Error::Domain("design matrix contains NaN".into()));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Domain("labels must be 0 or 1".into()));
    }
    Ok(())
}

/// Single CART tree with Gini splits; leaves hold the class-1 fraction.
///
/// The seed is accepted for interface symmetry; growth uses every feature
/// at every node and is fully deterministic.
pub fn fit_cart(x: &FeatureMatrix, y: &[u8], params: &TreeParams, seed: u64) -> Result<TreeEnsemble> {
    params.validate()?;
    check_training_data(x, y)?;
    let data = Presorted::new(x);
    let a: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let ones = vec![1.0; y.len()];
    let stats = RowStats {
        a: &a,
        b: &ones,
        weight: &ones,
    };
    let limits = GrowthLimits {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split as f64,
        min_samples_leaf: params.min_samples_leaf as f64,
    };
    let choice = FeatureChoice::Fixed((0..x.n_cols()).collect());
    let mut rng = rng::stream(seed, "decision_tree");
    let tree = grow(&data, &stats, &Gini, &limits, &choice, &mut rng);
    TreeEnsemble::new(Objective::ProbabilityAverage, 0.0, 1.0, x.names().to_vec(), vec![tree])
}

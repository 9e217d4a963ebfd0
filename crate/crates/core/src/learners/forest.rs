use rand::Rng;

use crate::error::Result;
use crate::exec::Execution;
use crate::matrix::FeatureMatrix;
use crate::rng;

use super::builder::{grow, FeatureChoice, Gini, GrowthLimits, Presorted, RowStats};
use super::cart::check_training_data;
use super::params::ForestParams;
use super::tree::{Objective, Tree, TreeEnsemble};

/// Bagged Gini trees with per-split feature sampling.
pub fn fit_random_forest(x: &FeatureMatrix, y: &[u8], params: &ForestParams, seed: u64) -> Result<TreeEnsemble> {
    fit_random_forest_with(x, y, params, seed, Execution::default())
}

/// As [`fit_random_forest`], building trees under `exec`. Tree `t` always
/// draws from its own substream, so the result does not depend on `exec`.
pub fn fit_random_forest_with(
    x: &FeatureMatrix,
    y: &[u8],
    params: &ForestParams,
    seed: u64,
    exec: Execution,
) -> Result<TreeEnsemble> {
    params.validate()?;
    check_training_data(x, y)?;
    let n = y.len();
    let p = x.n_cols();
    let data = Presorted::new(x);
    let labels: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let limits = GrowthLimits {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split as f64,
        min_samples_leaf: params.min_samples_leaf as f64,
    };
    let choice = FeatureChoice::PerNode {
        n_features: p,
        k: params.max_features.resolve(p),
    };

    let trees: Vec<Tree> = exec.map(params.n_estimators, |t| {
        let mut rng = rng::task_stream(seed, "random_forest", t as u64);
        let mut weight = vec![0.0; n];
        if params.bootstrap {
            for _ in 0..n {
                weight[rng.gen_range(0..n)] += 1.0;
            }
        } else {
            weight.fill(1.0);
        }
        let a: Vec<f64> = labels.iter().zip(&weight).map(|(y, w)| y * w).collect();
        let stats = RowStats {
            a: &a,
            b: &weight,
            weight: &weight,
        };
        grow(&data, &stats, &Gini, &limits, &choice, &mut rng)
    });
    TreeEnsemble::new(Objective::ProbabilityAverage, 0.0, 1.0, x.names().to_vec(), trees)
}

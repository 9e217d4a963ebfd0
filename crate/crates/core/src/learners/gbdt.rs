use rand::seq::index::sample;

use crate::error::Result;
use crate::matrix::FeatureMatrix;
use crate::{rng, sigmoid};

use super::builder::{grow, FeatureChoice, GrowthLimits, Newton, Presorted, RowStats};
use super::cart::check_training_data;
use super::params::GbdtParams;
use super::tree::{Objective, Tree, TreeEnsemble};

/// Second-order boosted trees on the logistic loss, starting from margin 0.
pub fn fit_gbdt(x: &FeatureMatrix, y: &[u8], params: &GbdtParams, seed: u64) -> Result<TreeEnsemble> {
    Ok(fit_gbdt_traced(x, y, params, seed)?.0)
}

/// Mean training log-loss at the given margins.
pub fn log_loss(margins: &[f64], y: &[u8]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(y)
        .map(|(&m, &yi)| {
            // log(1 + e^m) - y·m, stable on both tails
            let sp = if m > 0.0 {
                m + (-m).exp().ln_1p()
            } else {
                m.exp().ln_1p()
            };
            sp - f64::from(yi) * m
        })
        .sum();
    total / margins.len() as f64
}

/// As [`fit_gbdt`], also returning the mean training log-loss before the
/// first round and after every round.
pub fn fit_gbdt_traced(
    x: &FeatureMatrix,
    y: &[u8],
    params: &GbdtParams,
    seed: u64,
) -> Result<(TreeEnsemble, Vec<f64>)> {
    params.validate()?;
    check_training_data(x, y)?;
    let n = y.len();
    let p = x.n_cols();
    let data = Presorted::new(x);
    let criterion = Newton {
        reg_lambda: params.reg_lambda,
        gamma: params.gamma,
        learning_rate: params.learning_rate,
    };
    let limits = GrowthLimits {
        max_depth: params.max_depth,
        min_samples_split: 2.0,
        min_samples_leaf: 1.0,
    };
    let n_rows = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols = ((params.colsample_bytree * p as f64).round() as usize).clamp(1, p);
    let mut rng = rng::stream(seed, "gbdt");

    let base_score = 0.0;
    let mut margins = vec![base_score; n];
    let mut trace = vec![log_loss(&margins, y)];
    let mut trees: Vec<Tree> = Vec::with_capacity(params.n_estimators);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut weight = vec![0.0; n];

    for _ in 0..params.n_estimators {
        for i in 0..n {
            let pi = sigmoid(margins[i]);
            let s = if y[i] == 1 { params.scale_pos_weight } else { 1.0 };
            g[i] = s * (pi - f64::from(y[i]));
            h[i] = s * pi * (1.0 - pi);
        }
        if n_rows < n {
            weight.fill(0.0);
            for i in sample(&mut rng, n, n_rows) {
                weight[i] = 1.0;
            }
        } else {
            weight.fill(1.0);
        }
        let features = if n_cols < p {
            let mut f = sample(&mut rng, p, n_cols).into_vec();
            f.sort_unstable();
            f
        } else {
            (0..p).collect()
        };
        let stats = RowStats {
            a: &g,
            b: &h,
            weight: &weight,
        };
        let tree = grow(
            &data,
            &stats,
            &criterion,
            &limits,
            &FeatureChoice::Fixed(features),
            &mut rng,
        );
        for (m, row) in margins.iter_mut().zip(x.rows()) {
            *m += tree.predict(row);
        }
        trace.push(log_loss(&margins, y));
        trees.push(tree);
    }
    let ensemble = TreeEnsemble::new(
        Objective::LogisticMargin,
        base_score,
        params.learning_rate,
        x.names().to_vec(),
        trees,
    )?;
    Ok((ensemble, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::TreeNode;

    fn one_round(lr: f64, lambda: f64) -> GbdtParams {
        GbdtParams {
            learning_rate: lr,
            n_estimators: 1,
            max_depth: 3,
            reg_lambda: lambda,
            ..GbdtParams::default()
        }
    }

    #[test]
    fn balanced_labels_constant_feature_keep_half() {
        let x = FeatureMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let m = fit_gbdt(&x, &[1, 1, 0, 0], &one_round(1.0, 1.0), 0).unwrap();
        assert_eq!(m.trees[0].nodes, vec![TreeNode::Leaf { value: 0.0, cover: 4.0 }]);
        assert_eq!(m.predict_row(&[1.0]), 0.5);
    }

    #[test]
    fn all_positive_single_row_leaf() {
        // G = -1/2, H = 1/4 for one row at p = 0.5
        let x = FeatureMatrix::from_rows(&[vec![0.0]]).unwrap();
        let m = fit_gbdt(&x, &[1], &one_round(1.0, 0.0), 0).unwrap();
        assert_eq!(m.trees[0].predict(&[0.0]), 2.0);
        assert!((m.predict_row(&[0.0]) - 0.8807970779778823).abs() < 1e-15);
    }

    #[test]
    fn huge_gamma_gives_stumps_of_leaves() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let params = GbdtParams {
            gamma: 1e6,
            n_estimators: 5,
            ..GbdtParams::default()
        };
        let m = fit_gbdt(&x, &[0, 0, 1, 1], &params, 0).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn subsampling_is_seeded() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i * 7 % 11) as f64]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let params = GbdtParams {
            subsample: 0.5,
            colsample_bytree: 0.5,
            n_estimators: 10,
            ..GbdtParams::default()
        };
        let a = fit_gbdt(&x, &y, &params, 3).unwrap();
        let b = fit_gbdt(&x, &y, &params, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.trees.iter().all(|t| t.nodes[0].cover() == 20.0));
    }
}

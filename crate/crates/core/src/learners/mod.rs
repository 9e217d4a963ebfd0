//! The four classifiers: CART, random forest, boosted trees and L1
//! logistic regression.

mod builder;
mod cart;
mod forest;
mod gbdt;
mod logistic;
mod params;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::Execution;
use crate::lasso::LinearModel;
use crate::matrix::FeatureMatrix;
use crate::sigmoid;

pub use cart::fit_cart;
pub use forest::{fit_random_forest, fit_random_forest_with};
pub use gbdt::{fit_gbdt, fit_gbdt_traced, log_loss};
pub use logistic::{fit_logistic, logistic_lambda};
pub use params::{Family, ForestParams, GbdtParams, Hyperparams, LogisticParams, MaxFeatures, Penalty, TreeParams};
pub use tree::{Objective, Tree, TreeEnsemble, TreeNode};

/// A fitted classifier of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Trees(TreeEnsemble),
    Linear(LinearModel),
}

impl FittedModel {
    pub fn n_features(&self) -> usize {
        match self {
            FittedModel::Trees(e) => e.n_features(),
            FittedModel::Linear(m) => m.coefficients.len(),
        }
    }

    pub fn as_trees(&self) -> Option<&TreeEnsemble> {
        match self {
            FittedModel::Trees(e) => Some(e),
            FittedModel::Linear(_) => None,
        }
    }

    /// Class-1 probabilities for every row of `x`.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            FittedModel::Trees(e) => predict_proba_trees(e, x),
            FittedModel::Linear(m) => predict_proba_linear(m, x),
        }
    }
}

pub fn predict_proba_trees(model: &TreeEnsemble, x: &FeatureMatrix) -> Result<Vec<f64>> {
    Ok(model.margins(x)?.into_iter().map(|m| model.link(m)).collect())
}

pub fn predict_proba_linear(model: &LinearModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    Ok(model.margins(x)?.into_iter().map(sigmoid).collect())
}

/// Fits the family named by `params`.
pub fn fit(params: &Hyperparams, x: &FeatureMatrix, y: &[u8], seed: u64, exec: Execution) -> Result<FittedModel> {
    Ok(match params {
        Hyperparams::Gbdt(p) => FittedModel::Trees(fit_gbdt(x, y, p, seed)?),
        Hyperparams::RandomForest(p) => FittedModel::Trees(fit_random_forest_with(x, y, p, seed, exec)?),
        Hyperparams::DecisionTree(p) => FittedModel::Trees(fit_cart(x, y, p, seed)?),
        Hyperparams::Logistic(p) => FittedModel::Linear(fit_logistic(x, y, p)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn zero_linear_model_predicts_half() {
        let m = LinearModel {
            intercept: 0.0,
            feature_names: vec!["a".into(), "b".into()],
            coefficients: vec![0.0, 0.0],
            lambda: 0.0,
            converged: true,
            iterations: 0,
        };
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
        assert_eq!(predict_proba_linear(&m, &x).unwrap(), vec![0.5, 0.5]);
        let wide = FeatureMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(matches!(
            FittedModel::Linear(m).predict_proba(&wide),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn single_leaf_ensemble_is_constant() {
        let e = TreeEnsemble::new(
            Objective::LogisticMargin,
            0.0,
            1.0,
            vec!["a".into()],
            vec![Tree::leaf(0.7, 3.0)],
        )
        .unwrap();
        let x = FeatureMatrix::from_rows(&[vec![1.0], vec![-5.0], vec![9.0]]).unwrap();
        let p = predict_proba_trees(&e, &x).unwrap();
        assert!(p.iter().all(|&v| v == sigmoid(0.7)));
    }

    #[test]
    fn fitted_model_json_round_trip() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let m = fit(
            &Hyperparams::DecisionTree(TreeParams::default()),
            &x,
            &[0, 0, 1, 1],
            1,
            Execution::Sequential,
        )
        .unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: FittedModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}

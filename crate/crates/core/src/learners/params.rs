use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Second-order gradient boosting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbdtParams {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Fraction of rows drawn (without replacement) per round.
    pub subsample: f64,
    /// Fraction of features drawn per tree.
    pub colsample_bytree: f64,
    /// Minimum loss reduction for a split.
    pub gamma: f64,
    /// L2 penalty on leaf weights.
    pub reg_lambda: f64,
    /// Multiplier on the gradient and hessian of positive rows.
    pub scale_pos_weight: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.3,
            n_estimators: 100,
            max_depth: 6,
            subsample: 1.0,
            colsample_bytree: 1.0,
            gamma: 0.0,
            reg_lambda: 1.0,
            scale_pos_weight: 1.0,
        }
    }
}

/// Number of features considered at each random-forest split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `max(1, floor(sqrt(p)))`.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k.clamp(1, n_features.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    #[serde(default = "default_max_features")]
    pub max_features: MaxFeatures,
    #[serde(default = "default_true")]
    pub bootstrap: bool,
}

fn default_max_features() -> MaxFeatures {
    MaxFeatures::Sqrt
}

fn default_true() -> bool {
    true
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 8,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: usize::MAX,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticParams {
    #[serde(default = "default_penalty")]
    pub penalty: Penalty,
    /// Inverse regularisation strength; the penalty is λ = 1 / (C · n).
    #[serde(rename = "C", alias = "c")]
    pub c: f64,
    pub tol: f64,
}

fn default_penalty() -> Penalty {
    Penalty::L1
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            penalty: Penalty::L1,
            c: 1.0,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gbdt,
    RandomForest,
    DecisionTree,
    Logistic,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Gbdt,
        Family::RandomForest,
        Family::DecisionTree,
        Family::Logistic,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Family::Gbdt => "gbdt",
            Family::RandomForest => "random_forest",
            Family::DecisionTree => "decision_tree",
            Family::Logistic => "logistic",
        }
    }

    pub fn is_tree(self) -> bool {
        self != Family::Logistic
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Hyperparameters of one learner family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyperparams {
    Gbdt(GbdtParams),
    RandomForest(ForestParams),
    DecisionTree(TreeParams),
    Logistic(LogisticParams),
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Hyperparams(msg.to_string()))
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        check(
            self.learning_rate > 0.0 && self.learning_rate <= 1.0,
            "learning_rate must be in (0, 1]",
        )?;
        check(
            self.subsample > 0.0 && self.subsample <= 1.0,
            "subsample must be in (0, 1]",
        )?;
        check(
            self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0,
            "colsample_bytree must be in (0, 1]",
        )?;
        check(self.n_estimators >= 1, "n_estimators must be >= 1")?;
        check(self.max_depth >= 1, "max_depth must be >= 1")?;
        check(self.gamma >= 0.0, "gamma must be >= 0")?;
        check(self.reg_lambda >= 0.0, "reg_lambda must be >= 0")?;
        check(self.scale_pos_weight > 0.0, "scale_pos_weight must be > 0")
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        check(self.n_estimators >= 1, "n_estimators must be >= 1")?;
        check(self.max_depth >= 1, "max_depth must be >= 1")?;
        check(self.min_samples_split >= 1, "min_samples_split must be >= 1")?;
        check(self.min_samples_leaf >= 1, "min_samples_leaf must be >= 1")
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        check(self.max_depth >= 1, "max_depth must be >= 1")?;
        check(self.min_samples_split >= 1, "min_samples_split must be >= 1")?;
        check(self.min_samples_leaf >= 1, "min_samples_leaf must be >= 1")
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        check(self.c > 0.0 && self.c.is_finite(), "C must be > 0")?;
        check(self.tol > 0.0, "tol must be > 0")
    }
}

impl Hyperparams {
    pub fn family(&self) -> Family {
        match self {
            Hyperparams::Gbdt(_) => Family::Gbdt,
            Hyperparams::RandomForest(_) => Family::RandomForest,
            Hyperparams::DecisionTree(_) => Family::DecisionTree,
            Hyperparams::Logistic(_) => Family::Logistic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Hyperparams::Gbdt(p) => p.validate(),
            Hyperparams::RandomForest(p) => p.validate(),
            Hyperparams::DecisionTree(p) => p.validate(),
            Hyperparams::Logistic(p) => p.validate(),
        }
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyperparams::Gbdt(p) => write!(
                f,
                "learning_rate={} n_estimators={} max_depth={} subsample={} colsample_bytree={} gamma={} reg_lambda={} scale_pos_weight={}",
                p.learning_rate, p.n_estimators, p.max_depth, p.subsample, p.colsample_bytree, p.gamma, p.reg_lambda, p.scale_pos_weight
            ),
            Hyperparams::RandomForest(p) => write!(
                f,
                "n_estimators={} max_depth={} min_samples_split={} min_samples_leaf={} max_features={:?} bootstrap={}",
                p.n_estimators, p.max_depth, p.min_samples_split, p.min_samples_leaf, p.max_features, p.bootstrap
            ),
            Hyperparams::DecisionTree(p) => write!(
                f,
                "max_depth={} min_samples_split={} min_samples_leaf={}",
                p.max_depth, p.min_samples_split, p.min_samples_leaf
            ),
            Hyperparams::Logistic(p) => write!(f, "penalty=l1 C={} tol={}", p.c, p.tol),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(GbdtParams::default().validate().is_ok());
        let bad = GbdtParams {
            learning_rate: 0.0,
            ..GbdtParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = LogisticParams {
            c: 0.0,
            ..LogisticParams::default()
        };
        assert!(Hyperparams::Logistic(bad).validate().is_err());
        assert_eq!(MaxFeatures::Sqrt.resolve(38), 6);
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
    }
}

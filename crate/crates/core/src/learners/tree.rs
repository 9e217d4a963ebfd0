use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::sigmoid;

/// One node of a binary decision tree stored in a flat array.
///
/// Rows with `x[feature] < threshold` go left. `cover` is the training
/// weight (row count, with bootstrap multiplicity) that reached the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: f64,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl TreeNode {
    pub fn cover(&self) -> f64 {
        match *self {
            TreeNode::Internal { cover, .. } | TreeNode::Leaf { cover, .. } => cover,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }
}

/// A decision tree; node 0 is the root and children always follow their
/// parent in the array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: f64, cover: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { value, cover }],
        }
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                TreeNode::Leaf { .. } => return idx,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => idx = if row[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            TreeNode::Leaf { value, .. } => value,
            TreeNode::Internal { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Cover-weighted mean leaf value.
    pub fn expected_value(&self) -> f64 {
        fn walk(t: &Tree, i: usize) -> f64 {
            match t.nodes[i] {
                TreeNode::Leaf { value, .. } => value,
                TreeNode::Internal { left, right, cover, .. } => {
                    (t.nodes[left].cover() * walk(t, left) + t.nodes[right].cover() * walk(t, right)) / cover
                }
            }
        }
        walk(self, 0)
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Internal { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidModel("empty tree".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let cover = node.cover();
            if !(cover > 0.0) || !cover.is_finite() {
                return Err(Error::InvalidModel(format!("node {i} has cover {cover}")));
            }
            match *node {
                TreeNode::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(Error::InvalidModel(format!("leaf {i} value is not finite")));
                    }
                }
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    cover,
                } => {
                    if feature >= n_features {
                        return Err(Error::InvalidModel(format!(
                            "node {i} splits on feature {feature} of {n_features}"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::InvalidModel(format!("node {i} threshold is not finite")));
                    }
                    if left <= i || right <= i || left >= self.nodes.len() || right >= self.nodes.len() || left == right
                    {
                        return Err(Error::InvalidModel(format!("node {i} has invalid children")));
                    }
                    let sum = self.nodes[left].cover() + self.nodes[right].cover();
                    if (sum - cover).abs() > 1e-9 * cover.max(1.0) {
                        return Err(Error::InvalidModel(format!("node {i} cover {cover} != children {sum}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// How tree outputs combine into a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `p = sigmoid(base_score + Σ tree outputs)`.
    LogisticMargin,
    /// `p = mean of per-tree leaf probabilities`.
    ProbabilityAverage,
}

/// A fitted tree ensemble (CART, random forest or boosted trees).
///
/// JSON layout:
///
/// ```json
/// {
///   "objective": "logistic_margin",
///   "base_score": 0.0,
///   "learning_rate": 0.1,
///   "feature_names": ["x0", "x1"],
///   "trees": [
///     {"nodes": [
///       {"type": "internal", "feature": 1, "threshold": 0.5, "left": 1, "right": 2, "cover": 100.0},
///       {"type": "leaf", "value": -0.4, "cover": 60.0},
///       {"type": "leaf", "value": 0.7, "cover": 40.0}
///     ]}
///   ]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub objective: Objective,
    /// Margin offset; only used by `logistic_margin`.
    pub base_score: f64,
    /// Shrinkage already folded into the leaf values (informational).
    pub learning_rate: f64,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn new(
        objective: Objective,
        base_score: f64,
        learning_rate: f64,
        feature_names: Vec<String>,
        trees: Vec<Tree>,
    ) -> Result<Self> {
        let e = Self {
            objective,
            base_score,
            learning_rate,
            feature_names,
            trees,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::InvalidModel("ensemble has no trees".into()));
        }
        if !self.base_score.is_finite() {
            return Err(Error::InvalidModel("base score is not finite".into()));
        }
        self.trees.iter().try_for_each(|t| t.validate(self.n_features()))
    }

    /// Weight of each tree's output in the native (pre-link) output.
    pub fn tree_weight(&self) -> f64 {
        match self.objective {
            Objective::LogisticMargin => 1.0,
            Objective::ProbabilityAverage => 1.0 / self.trees.len() as f64,
        }
    }

    /// Constant added to the weighted tree outputs in native units.
    pub fn native_offset(&self) -> f64 {
        match self.objective {
            Objective::LogisticMargin => self.base_score,
            Objective::ProbabilityAverage => 0.0,
        }
    }

    /// Native model output: log-odds for `logistic_margin`, probability
    /// for `probability_average`.
    pub fn margin(&self, row: &[f64]) -> f64 {
        let w = self.tree_weight();
        self.native_offset() + self.trees.iter().map(|t| w * t.predict(row)).sum::<f64>()
    }

    pub fn link(&self, native: f64) -> f64 {
        match self.objective {
            Objective::LogisticMargin => sigmoid(native),
            Objective::ProbabilityAverage => native,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.link(self.margin(row))
    }

    pub fn margins(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_width(x)?;
        Ok(x.rows().map(|r| self.margin(r)).collect())
    }

    pub(crate) fn check_width(&self, x: &FeatureMatrix) -> Result<()> {
        if x.n_cols() != self.n_features() {
            return Err(Error::Shape(format!(
                "model has {} features, matrix has {} columns",
                self.n_features(),
                x.n_cols()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let e: TreeEnsemble = serde_json::from_str(text)?;
        e.validate()?;
        Ok(e)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

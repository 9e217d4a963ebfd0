//! Greedy depth-first tree growth shared by CART, random forest and boosting.
//!
//! Every training row carries two additive statistics `(a, b)` and a cover
//! weight. A [`Criterion`] turns node sums into a loss to minimise and a leaf
//! value. Candidate thresholds are midpoints between consecutive distinct
//! values; per-feature row lists are presorted once and stably partitioned
//! at every split, so a level costs O(features × rows).

use rand::seq::index::sample;

use crate::matrix::FeatureMatrix;
use crate::rng::StreamRng;

use super::tree::{Tree, TreeNode};

pub(crate) trait Criterion {
    /// Node loss from statistic sums; splits minimise the children's total.
    fn loss(&self, a: f64, b: f64) -> f64;
    fn leaf_value(&self, a: f64, b: f64) -> f64;
    /// Whether a split with loss reduction `gain` is kept.
    fn accept(&self, gain: f64) -> bool;
    /// Nodes for which no split is attempted.
    fn is_terminal(&self, _a: f64, _b: f64) -> bool {
        false
    }
}

/// Gini impurity scaled by node weight: `a` = positive weight, `b` = total
/// weight, loss = b · 2p(1 − p).
pub(crate) struct Gini;

impl Criterion for Gini {
    fn loss(&self, a: f64, b: f64) -> f64 {
        if b <= 0.0 {
            0.0
        } else {
            2.0 * a * (b - a) / b
        }
    }

    fn leaf_value(&self, a: f64, b: f64) -> f64 {
        a / b
    }

    fn accept(&self, gain: f64) -> bool {
        // weighted impurity never rises under a split; ties at zero still
        // split (e.g. XOR-like nodes)
        gain >= -1e-12
    }

    fn is_terminal(&self, a: f64, b: f64) -> bool {
        a == 0.0 || a == b
    }
}

/// Second-order boosting objective: `a` = gradient, `b` = hessian.
pub(crate) struct Newton {
    pub reg_lambda: f64,
    pub gamma: f64,
    pub learning_rate: f64,
}

/// Floor on `H + λ` in the leaf-weight and gain denominators.
pub(crate) const HESSIAN_FLOOR: f64 = 1e-16;

impl Criterion for Newton {
    fn loss(&self, g: f64, h: f64) -> f64 {
        -0.5 * g * g / (h + self.reg_lambda).max(HESSIAN_FLOOR)
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.reg_lambda).max(HESSIAN_FLOOR) * self.learning_rate
    }

    fn accept(&self, gain: f64) -> bool {
        gain - self.gamma > 0.0
    }
}

pub(crate) struct GrowthLimits {
    pub max_depth: usize,
    pub min_samples_split: f64,
    pub min_samples_leaf: f64,
}

/// Which features a node may split on.
pub(crate) enum FeatureChoice {
    /// Fixed ascending list (all features, or a per-tree column sample).
    Fixed(Vec<usize>),
    /// `k` features drawn without replacement at every node.
    PerNode { n_features: usize, k: usize },
}

/// Column-major training data with presorted row order per feature.
pub(crate) struct Presorted {
    cols: Vec<Vec<f64>>,
    order: Vec<Vec<usize>>,
}

impl Presorted {
    pub fn new(x: &FeatureMatrix) -> Self {
        let cols: Vec<Vec<f64>> = (0..x.n_cols()).map(|j| x.column(j)).collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<usize> = (0..c.len()).collect();
                idx.sort_by(|&i, &k| c[i].total_cmp(&c[k]).then(i.cmp(&k)));
                idx
            })
            .collect();
        Self { cols, order }
    }
}

/// Per-row statistics for one tree.
pub(crate) struct RowStats<'a> {
    pub a: &'a [f64],
    pub b: &'a [f64],
    /// Cover per row; rows with zero weight are out of sample.
    pub weight: &'a [f64],
}

struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Grower<'a, C: Criterion> {
    data: &'a Presorted,
    stats: &'a RowStats<'a>,
    criterion: &'a C,
    limits: &'a GrowthLimits,
    choice: &'a FeatureChoice,
    nodes: Vec<TreeNode>,
    go_left: Vec<bool>,
}

pub(crate) fn grow<C: Criterion>(
    data: &Presorted,
    stats: &RowStats<'_>,
    criterion: &C,
    limits: &GrowthLimits,
    choice: &FeatureChoice,
    rng: &mut StreamRng,
) -> Tree {
    let n = stats.weight.len();
    let lists: Vec<Vec<usize>> = data
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&i| stats.weight[i] > 0.0).collect())
        .collect();
    let mut g = Grower {
        data,
        stats,
        criterion,
        limits,
        choice,
        nodes: Vec::new(),
        go_left: vec![false; n],
    };
    g.node(lists, 0, rng);
    Tree { nodes: g.nodes }
}

impl<C: Criterion> Grower<'_, C> {
    fn sums(&self, rows: &[usize]) -> (f64, f64, f64) {
        rows.iter().fold((0.0, 0.0, 0.0), |(a, b, w), &i| {
            (a + self.stats.a[i], b + self.stats.b[i], w + self.stats.weight[i])
        })
    }

    fn candidates(&self, rng: &mut StreamRng) -> Vec<usize> {
        match self.choice {
            FeatureChoice::Fixed(f) => f.clone(),
            FeatureChoice::PerNode { n_features, k } => {
                if k >= n_features {
                    (0..*n_features).collect()
                } else {
                    let mut f = sample(rng, *n_features, *k).into_vec();
                    f.sort_unstable();
                    f
                }
            }
        }
    }

    fn best_split(&self, lists: &[Vec<usize>], features: &[usize], totals: (f64, f64, f64)) -> Option<Split> {
        let (ta, tb, tw) = totals;
        let parent = self.criterion.loss(ta, tb);
        let mut best: Option<Split> = None;
        for &f in features {
            let col = &self.data.cols[f];
            let rows = &lists[f];
            let (mut la, mut lb, mut lw) = (0.0, 0.0, 0.0);
            for pos in 0..rows.len().saturating_sub(1) {
                let i = rows[pos];
                la += self.stats.a[i];
                lb += self.stats.b[i];
                lw += self.stats.weight[i];
                let (lo, hi) = (col[i], col[rows[pos + 1]]);
                if !(hi > lo) {
                    continue;
                }
                if lw < self.limits.min_samples_leaf || tw - lw < self.limits.min_samples_leaf {
                    continue;
                }
                let gain = parent - self.criterion.loss(la, lb) - self.criterion.loss(ta - la, tb - lb);
                if best.as_ref().map_or(true, |b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if !(threshold > lo) {
                        threshold = hi;
                    }
                    best = Some(Split {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn node(&mut self, lists: Vec<Vec<usize>>, depth: usize, rng: &mut StreamRng) -> usize {
        // every list holds the node's rows; take any nonempty one for sums
        let rows = lists.iter().find(|l| !l.is_empty()).cloned().unwrap_or_default();
        let totals = self.sums(&rows);
        let (ta, tb, tw) = totals;
        let idx = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: self.criterion.leaf_value(ta, tb),
            cover: tw,
        });

        let can_split =
            depth < self.limits.max_depth && tw >= self.limits.min_samples_split && !self.criterion.is_terminal(ta, tb);
        if !can_split {
            return idx;
        }
        let features = self.candidates(rng);
        let Some(split) = self.best_split(&lists, &features, totals) else {
            return idx;
        };
        if !self.criterion.accept(split.gain) {
            return idx;
        }

        let col = &self.data.cols[split.feature];
        for &i in &rows {
            self.go_left[i] = col[i] < split.threshold;
        }
        let (mut left, mut right) = (Vec::with_capacity(lists.len()), Vec::with_capacity(lists.len()));
        for list in lists {
            let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&i| self.go_left[i]);
            left.push(l);
            right.push(r);
        }
        let l = self.node(left, depth + 1, rng);
        let r = self.node(right, depth + 1, rng);
        self.nodes[idx] = TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
            cover: tw,
        };
        idx
    }
}

//! Stratified k-fold splitting and grid search scored by cross-validated AUC.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cohort::Scaler;
use crate::error::{Error, Result};
use crate::evaluation::{accuracy_at_cutoff, auc};
use crate::exec::Execution;
use crate::learners::{self, Family, ForestParams, GbdtParams, Hyperparams, LogisticParams, MaxFeatures, TreeParams};
use crate::matrix::FeatureMatrix;
use crate::rng::{self, DEFAULT_SEED};

/// Assignment of every row to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles each class and deals its rows round-robin over the folds,
/// continuing the deal position from one class to the next so fold sizes
/// differ by at most one.
pub fn stratified_kfold(y: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Stratification(format!("k must be at least 2, got {k}")));
    }
    let mut rng = rng::stream(seed, "folds");
    let mut assignments = vec![0; y.len()];
    let mut next = 0;
    for class in [1u8, 0u8] {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if rows.len() < k {
            return Err(Error::Stratification(format!(
                "class {class} has {} rows, fewer than k = {k}",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for i in rows {
            assignments[i] = next % k;
            next += 1;
        }
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Domain("labels must be 0 or 1".into()));
    }
    Ok(FoldPlan { k, assignments, seed })
}

/// Per-family lists of values; the grid is their cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbdtGrid {
    pub learning_rate: Vec<f64>,
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub subsample: Vec<f64>,
    pub colsample_bytree: Vec<f64>,
    pub gamma: Vec<f64>,
    pub reg_lambda: Vec<f64>,
    pub scale_pos_weight: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeGrid {
    pub max_depth: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticGrid {
    #[serde(rename = "C", alias = "c")]
    pub c: Vec<f64>,
    pub tol: Vec<f64>,
}

fn product2<A: Copy, B: Copy>(a: &[A], b: &[B]) -> Vec<(A, B)> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

/// Mixed-radix odometer over `sizes`; yields every index combination with
/// the last position varying fastest.
fn combinations(sizes: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|mut t| {
            let mut idx = vec![0; sizes.len()];
            for (slot, &s) in idx.iter_mut().zip(sizes).rev() {
                *slot = t % s;
                t /= s;
            }
            idx
        })
        .collect()
}

impl GbdtGrid {
    pub fn expand(&self) -> Vec<Hyperparams> {
        let sizes = [
            self.learning_rate.len(),
            self.n_estimators.len(),
            self.max_depth.len(),
            self.subsample.len(),
            self.colsample_bytree.len(),
            self.gamma.len(),
            self.reg_lambda.len(),
            self.scale_pos_weight.len(),
        ];
        combinations(&sizes)
            .into_iter()
            .map(|i| {
                Hyperparams::Gbdt(GbdtParams {
                    learning_rate: self.learning_rate[i[0]],
                    n_estimators: self.n_estimators[i[1]],
                    max_depth: self.max_depth[i[2]],
                    subsample: self.subsample[i[3]],
                    colsample_bytree: self.colsample_bytree[i[4]],
                    gamma: self.gamma[i[5]],
                    reg_lambda: self.reg_lambda[i[6]],
                    scale_pos_weight: self.scale_pos_weight[i[7]],
                })
            })
            .collect()
    }
}

impl ForestGrid {
    pub fn expand(&self) -> Vec<Hyperparams> {
        let mut out = Vec::new();
        for (n_estimators, max_depth) in product2(&self.n_estimators, &self.max_depth) {
            for (min_samples_split, min_samples_leaf) in product2(&self.min_samples_split, &self.min_samples_leaf) {
                out.push(Hyperparams::RandomForest(ForestParams {
                    n_estimators,
                    max_depth,
                    min_samples_split,
                    min_samples_leaf,
                    max_features: MaxFeatures::Sqrt,
                    bootstrap: true,
                }));
            }
        }
        out
    }
}

impl TreeGrid {
    pub fn expand(&self) -> Vec<Hyperparams> {
        let mut out = Vec::new();
        for &max_depth in &self.max_depth {
            for (min_samples_split, min_samples_leaf) in product2(&self.min_samples_split, &self.min_samples_leaf) {
                out.push(Hyperparams::DecisionTree(TreeParams {
                    max_depth,
                    min_samples_split,
                    min_samples_leaf,
                }));
            }
        }
        out
    }
}

impl LogisticGrid {
    pub fn expand(&self) -> Vec<Hyperparams> {
        product2(&self.c, &self.tol)
            .into_iter()
            .map(|(c, tol)| {
                Hyperparams::Logistic(LogisticParams {
                    c,
                    tol,
                    ..LogisticParams::default()
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    pub k: usize,
    pub seed: u64,
    /// Columns to z-score inside every training fold; `None` leaves the
    /// matrix as given.
    pub standardize: Option<Vec<bool>>,
    pub exec: Execution,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            k: 10,
            seed: DEFAULT_SEED,
            standardize: None,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub params: Hyperparams,
    /// Mean of `fold_aucs`; `None` when the candidate failed.
    pub mean_auc: Option<f64>,
    pub fold_aucs: Vec<f64>,
    /// Mean fold accuracy at cutoff 0.5.
    pub mean_accuracy: Option<f64>,
    pub error: Option<String>,
    /// Out-of-fold probability for every row.
    #[serde(skip)]
    pub oof_predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub family: Family,
    pub scoring: String,
    pub candidates: Vec<CandidateResult>,
    /// Index of the best candidate; `None` if every candidate failed.
    pub best: Option<usize>,
    pub plan: FoldPlan,
}

impl GridResult {
    pub fn best_candidate(&self) -> Option<&CandidateResult> {
        self.best.map(|b| &self.candidates[b])
    }

    /// `family, candidate, params, mean_auc, mean_accuracy, fold_aucs, status`.
    pub fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>, header: bool) -> Result<()> {
        if header {
            w.write_record([
                "family",
                "candidate",
                "params",
                "mean_auc",
                "mean_accuracy",
                "fold_aucs",
                "best",
                "status",
            ])?;
        }
        for (i, c) in self.candidates.iter().enumerate() {
            let fold = c.fold_aucs.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";");
            w.write_record([
                self.family.tag().to_string(),
                i.to_string(),
                c.params.to_string(),
                c.mean_auc.map_or(String::new(), |v| v.to_string()),
                c.mean_accuracy.map_or(String::new(), |v| v.to_string()),
                fold,
                (self.best == Some(i)).to_string(),
                c.error.clone().unwrap_or_else(|| "ok".into()),
            ])?;
        }
        Ok(())
    }
}

struct FoldOutcome {
    test: Vec<usize>,
    probs: Vec<f64>,
    auc: f64,
    accuracy: f64,
}

/// Scores every candidate by k-fold AUC on one shared fold plan and returns
/// the highest mean (ties keep the first-listed candidate).
pub fn grid_search(grid: &[Hyperparams], x: &FeatureMatrix, y: &[u8], opts: &GridOptions) -> Result<GridResult> {
    let Some(first) = grid.first() else {
        return Err(Error::Hyperparams("empty grid".into()));
    };
    let family = first.family();
    if grid.iter().any(|h| h.family() != family) {
        return Err(Error::Hyperparams("grid mixes learner families".into()));
    }
    if x.n_rows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.n_rows(), y.len())));
    }
    if let Some(mask) = &opts.standardize {
        if mask.len() != x.n_cols() {
            return Err(Error::Shape("standardize mask width differs from matrix".into()));
        }
    }
    let plan = stratified_kfold(y, opts.k, opts.seed)?;
    let k = plan.k;

    let folds: Vec<(FeatureMatrix, Vec<u8>, FeatureMatrix, Vec<u8>, Vec<usize>)> = (0..k)
        .map(|f| {
            let train = plan.train_indices(f);
            let test = plan.test_indices(f);
            if test.iter().any(|i| train.binary_search(i).is_ok()) {
                return Err(Error::Stratification(format!("fold {f} leaks test rows into training")));
            }
            let (mut xtr, mut xte) = (x.select_rows(&train), x.select_rows(&test));
            if let Some(mask) = &opts.standardize {
                let scaler = Scaler::fit_matrix(&xtr, mask);
                xtr = scaler.apply_matrix(&xtr)?;
                xte = scaler.apply_matrix(&xte)?;
            }
            let ytr = train.iter().map(|&i| y[i]).collect();
            let yte = test.iter().map(|&i| y[i]).collect();
            Ok((xtr, ytr, xte, yte, test))
        })
        .collect::<Result<_>>()?;

    let outcomes: Vec<Result<FoldOutcome>> = opts.exec.map(grid.len() * k, |task| {
        let (c, f) = (task / k, task % k);
        let (xtr, ytr, xte, yte, test) = &folds[f];
        let model = learners::fit(&grid[c], xtr, ytr, opts.seed, Execution::Sequential)?;
        let probs = model.predict_proba(xte)?;
        Ok(FoldOutcome {
            test: test.clone(),
            auc: auc(yte, &probs)?,
            accuracy: accuracy_at_cutoff(yte, &probs, 0.5),
            probs,
        })
    });

    let mut candidates = Vec::with_capacity(grid.len());
    let mut outcomes = outcomes.into_iter();
    for params in grid {
        let mut fold_aucs = Vec::with_capacity(k);
        let mut accs = Vec::with_capacity(k);
        let mut oof = vec![f64::NAN; y.len()];
        let mut error = None;
        for o in outcomes.by_ref().take(k) {
            match o {
                Ok(o) => {
                    fold_aucs.push(o.auc);
                    accs.push(o.accuracy);
                    for (&i, &p) in o.test.iter().zip(&o.probs) {
                        oof[i] = p;
                    }
                }
                Err(e) => {
                    if error.is_none() {
                        error = Some(e.to_string());
                    }
                }
            }
        }
        let ok = error.is_none();
        candidates.push(CandidateResult {
            params: params.clone(),
            mean_auc: ok.then(|| fold_aucs.iter().sum::<f64>() / k as f64),
            mean_accuracy: ok.then(|| accs.iter().sum::<f64>() / k as f64),
            fold_aucs,
            error,
            oof_predictions: if ok { oof } else { Vec::new() },
        });
    }

    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if let Some(m) = c.mean_auc {
            if best.map_or(true, |b| m > candidates[b].mean_auc.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(i);
            }
        }
    }
    Ok(GridResult {
        family,
        scoring: "roc_auc".into(),
        candidates,
        best,
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_divisibility() {
        let y = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let plan = stratified_kfold(&y, 5, 3).unwrap();
        for f in 0..5 {
            let test = plan.test_indices(f);
            assert_eq!(test.len(), 2);
            assert_eq!(test.iter().filter(|&&i| y[i] == 1).count(), 1);
        }
    }

    #[test]
    fn partition_balance_and_errors() {
        let y: Vec<u8> = (0..53).map(|i| u8::from(i % 3 == 0)).collect();
        let plan = stratified_kfold(&y, 10, 1).unwrap();
        let sizes = plan.fold_sizes();
        assert_eq!(sizes.iter().sum::<usize>(), 53);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert!(plan.assignments.iter().all(|&f| f < 10));
        assert_eq!(plan, stratified_kfold(&y, 10, 1).unwrap());
        assert!(matches!(
            stratified_kfold(&[1, 1, 0, 0, 0], 3, 1),
            Err(Error::Stratification(_))
        ));
    }

    fn xor(n: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let y = rows.iter().map(|r| u8::from((r[0] > 0.0) != (r[1] > 0.0))).collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn deeper_tree_wins_on_xor() {
        let (x, y) = xor(200, 7);
        let grid = TreeGrid {
            max_depth: vec![1, 3],
            min_samples_split: vec![2],
            min_samples_leaf: vec![1],
        }
        .expand();
        let opts = GridOptions {
            k: 5,
            ..GridOptions::default()
        };
        let r = grid_search(&grid, &x, &y, &opts).unwrap();
        assert_eq!(r.best, Some(1));
        for c in &r.candidates {
            let mean = c.fold_aucs.iter().sum::<f64>() / 5.0;
            assert!((c.mean_auc.unwrap() - mean).abs() < 1e-12);
            assert_eq!(c.fold_aucs.len(), 5);
        }
        assert_eq!(r, grid_search(&grid, &x, &y, &opts).unwrap());
    }

    #[test]
    fn singleton_grid_and_failed_candidates() {
        let (x, y) = xor(60, 8);
        let good = Hyperparams::DecisionTree(TreeParams::default());
        let bad = Hyperparams::DecisionTree(TreeParams {
            max_depth: 0,
            ..TreeParams::default()
        });
        let opts = GridOptions {
            k: 3,
            ..GridOptions::default()
        };
        let r = grid_search(&[good.clone()], &x, &y, &opts).unwrap();
        assert_eq!(r.best, Some(0));
        let r = grid_search(&[bad, good], &x, &y, &opts).unwrap();
        assert!(r.candidates[0].error.is_some());
        assert_eq!(r.best, Some(1));
    }

    #[test]
    fn grid_expansion_counts() {
        let g = GbdtGrid {
            learning_rate: vec![0.1, 0.3],
            n_estimators: vec![10],
            max_depth: vec![2, 3, 4],
            subsample: vec![1.0],
            colsample_bytree: vec![1.0],
            gamma: vec![0.0],
            reg_lambda: vec![0.1, 1.0],
            scale_pos_weight: vec![1.0],
        };
        assert_eq!(g.expand().len(), 12);
    }
}

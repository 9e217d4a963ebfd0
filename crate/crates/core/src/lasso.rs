//! L1-penalised logistic regression.
//!
//! Minimises `(1/n) Σ logloss(y_i, β0 + x_iᵀβ) + λ ‖β‖₁` with an unpenalised
//! intercept. Each outer iteration forms the IRLS quadratic approximation at
//! the current iterate and solves the resulting weighted lasso by cyclic
//! coordinate descent with an active-set strategy; the step towards that
//! solution is backtracked until the true objective does not increase, so the
//! objective is monotone across outer iterations.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::matrix::FeatureMatrix;
use crate::rng::DEFAULT_SEED;
use crate::selection::stratified_kfold;
use crate::{logit, sigmoid};

/// Floor on the IRLS weights p(1 - p).
pub const IRLS_WEIGHT_FLOOR: f64 = 1e-5;

/// Intercept plus coefficients over named features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Penalty the model was fitted at (0 for an unpenalised fit).
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl LinearModel {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.coefficients[j])
    }

    /// Names of features with a nonzero coefficient, in column order.
    pub fn nonzero_features(&self) -> Vec<String> {
        self.feature_names
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, &b)| b != 0.0)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn nonzero_count(&self) -> usize {
        self.coefficients.iter().filter(|&&b| b != 0.0).count()
    }

    #[inline]
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }

    pub fn margins(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.coefficients.len() {
            return Err(Error::Shape(format!(
                "model has {} features, matrix has {} columns",
                self.coefficients.len(),
                x.n_cols()
            )));
        }
        Ok(x.rows().map(|r| self.margin(r)).collect())
    }
}

/// `sign(z) · max(|z| − gamma, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Convergence threshold on the largest coefficient change per outer
    /// iteration.
    pub tol: f64,
    /// Maximum outer (IRLS) iterations.
    pub max_iter: usize,
    /// Maximum coordinate-descent sweeps per outer iteration.
    pub max_sweeps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            max_sweeps: 10_000,
        }
    }
}

/// Column-major copy of the design plus labels, shared across path fits.
struct Problem {
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
    names: Vec<String>,
    n: usize,
}

impl Problem {
    fn new(x: &FeatureMatrix, y: &[u8]) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::Shape(format!("{} rows but {} labels", x.n_rows(), y.len())));
        }
        if x.n_rows() == 0 {
            return Err(Error::EmptyCohort);
        }
        if x.has_nan() {
            return Err(Error::Domain("design matrix contains NaN".into()));
        }
        let n1 = y.iter().filter(|&&v| v == 1).count();
        if n1 == 0 || n1 == y.len() {
            return Err(Error::DegenerateLabels);
        }
        Ok(Self {
            cols: (0..x.n_cols()).map(|j| x.column(j)).collect(),
            y: y.iter().map(|&v| f64::from(v)).collect(),
            names: x.names().to_vec(),
            n: x.n_rows(),
        })
    }

    fn p(&self) -> usize {
        self.cols.len()
    }

    fn y_mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.n as f64
    }

    fn lambda_max(&self) -> f64 {
        let ybar = self.y_mean();
        self.cols
            .iter()
            .map(|c| (c.iter().zip(&self.y).map(|(x, y)| x * (y - ybar)).sum::<f64>() / self.n as f64).abs())
            .fold(0.0, f64::max)
    }

    fn margins(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.n];
        for (c, &b) in self.cols.iter().zip(beta) {
            if b != 0.0 {
                for (e, x) in eta.iter_mut().zip(c) {
                    *e += b * x;
                }
            }
        }
        eta
    }

    fn objective(&self, b0: f64, beta: &[f64], lambda: f64) -> f64 {
        let eta = self.margins(b0, beta);
        let loss: f64 = eta.iter().zip(&self.y).map(|(&e, &y)| log1p_exp(e) - y * e).sum();
        loss / self.n as f64 + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn zero_model(&self, lambda: f64) -> LinearModel {
        LinearModel {
            intercept: logit(self.y_mean()),
            feature_names: self.names.clone(),
            coefficients: vec![0.0; self.p()],
            lambda,
            converged: true,
            iterations: 0,
        }
    }

    /// Prox-Newton solve from `start`; returns the model and the objective
    /// after every outer iteration (entry 0 is the starting objective).
    fn fit(&self, lambda: f64, opts: &FitOptions, start: Option<&LinearModel>) -> (LinearModel, Vec<f64>) {
        if lambda >= self.lambda_max() {
            let m = self.zero_model(lambda);
            let obj = self.objective(m.intercept, &m.coefficients, lambda);
            return (m, vec![obj]);
        }
        let n = self.n as f64;
        let p = self.p();
        let (mut b0, mut beta) = match start {
            Some(m) => (m.intercept, m.coefficients.clone()),
            None => (logit(self.y_mean()), vec![0.0; p]),
        };
        let mut obj = self.objective(b0, &beta, lambda);
        let mut trace = vec![obj];
        let mut converged = false;
        let mut iterations = 0;
        let inner_tol = opts.tol * 0.1;

        let mut w = vec![0.0; self.n];
        let mut r = vec![0.0; self.n];
        let mut xwx = vec![0.0; p];

        while iterations < opts.max_iter {
            iterations += 1;
            let eta = self.margins(b0, &beta);
            for i in 0..self.n {
                let pi = sigmoid(eta[i]);
                w[i] = (pi * (1.0 - pi)).max(IRLS_WEIGHT_FLOOR);
                // working residual z - eta
                r[i] = (self.y[i] - pi) / w[i];
            }
            let wsum: f64 = w.iter().sum();
            for (j, c) in self.cols.iter().enumerate() {
                xwx[j] = c.iter().zip(&w).map(|(x, wi)| wi * x * x).sum::<f64>() / n;
            }

            // weighted lasso on the quadratic model, starting at the iterate
            let mut c0 = b0;
            let mut cand = beta.clone();
            let mut active: Vec<usize> = (0..p).filter(|&j| cand[j] != 0.0).collect();
            let mut full_sweep = true;
            for _ in 0..opts.max_sweeps {
                let mut max_change = 0.0_f64;
                let d0 = r.iter().zip(&w).map(|(ri, wi)| ri * wi).sum::<f64>() / wsum;
                if d0 != 0.0 {
                    c0 += d0;
                    r.iter_mut().for_each(|ri| *ri -= d0);
                    max_change = max_change.max(d0.abs());
                }
                let coords: Vec<usize> = if full_sweep { (0..p).collect() } else { active.clone() };
                for j in coords {
                    if xwx[j] == 0.0 {
                        continue;
                    }
                    let col = &self.cols[j];
                    let grad = col.iter().zip(&r).zip(&w).map(|((x, ri), wi)| wi * x * ri).sum::<f64>() / n;
                    let old = cand[j];
                    let new = soft_threshold(grad + xwx[j] * old, lambda) / xwx[j];
                    if new != old {
                        let delta = new - old;
                        for (ri, x) in r.iter_mut().zip(col) {
                            *ri -= delta * x;
                        }
                        cand[j] = new;
                        max_change = max_change.max(delta.abs());
                    }
                }
                if max_change < inner_tol {
                    if full_sweep {
                        break;
                    }
                    // active set settled; confirm with a sweep over all
                    full_sweep = true;
                } else if full_sweep {
                    active = (0..p).filter(|&j| cand[j] != 0.0).collect();
                    full_sweep = false;
                }
            }

            // backtrack from the quadratic-model solution
            let d0 = c0 - b0;
            let dir: Vec<f64> = cand.iter().zip(&beta).map(|(c, b)| c - b).collect();
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-12 {
                let tb0 = b0 + t * d0;
                let tbeta: Vec<f64> = beta.iter().zip(&dir).map(|(b, d)| b + t * d).collect();
                let tobj = self.objective(tb0, &tbeta, lambda);
                if tobj <= obj {
                    accepted = Some((tb0, tbeta, tobj));
                    break;
                }
                t *= 0.5;
            }
            let Some((nb0, nbeta, nobj)) = accepted else {
                // no descent direction left within floating-point resolution
                converged = true;
                trace.push(obj);
                break;
            };
            let change = nbeta
                .iter()
                .zip(&beta)
                .map(|(a, b)| (a - b).abs())
                .fold((nb0 - b0).abs(), f64::max);
            b0 = nb0;
            beta = nbeta;
            obj = nobj;
            trace.push(obj);
            if change < opts.tol {
                converged = true;
                break;
            }
        }

        let model = LinearModel {
            intercept: b0,
            feature_names: self.names.clone(),
            coefficients: beta,
            lambda,
            converged,
            iterations,
        };
        (model, trace)
    }
}

#[inline]
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Smallest penalty with an all-zero coefficient vector:
/// `max_j |x_jᵀ(y − ȳ)| / n`.
pub fn lambda_max(x: &FeatureMatrix, y: &[u8]) -> Result<f64> {
    Ok(Problem::new(x, y)?.lambda_max())
}

/// Penalised objective of `model` on `(x, y)`.
pub fn objective(x: &FeatureMatrix, y: &[u8], model: &LinearModel) -> Result<f64> {
    Ok(Problem::new(x, y)?.objective(model.intercept, &model.coefficients, model.lambda))
}

/// Fits L1-penalised logistic regression at a single penalty.
///
/// `x` should be column-standardized. A fit that exhausts `max_iter` is
/// returned with `converged = false`.
pub fn fit_l1_logistic(x: &FeatureMatrix, y: &[u8], lambda: f64, opts: &FitOptions) -> Result<LinearModel> {
    Ok(fit_l1_logistic_traced(x, y, lambda, opts)?.0)
}

/// As [`fit_l1_logistic`], also returning the objective after each outer
/// iteration.
pub fn fit_l1_logistic_traced(
    x: &FeatureMatrix,
    y: &[u8],
    lambda: f64,
    opts: &FitOptions,
) -> Result<(LinearModel, Vec<f64>)> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "lambda must be a finite nonnegative number, got {lambda}"
        )));
    }
    let problem = Problem::new(x, y)?;
    Ok(problem.fit(lambda, opts, None))
}

/// Log-spaced grid from `lmax` down to `ratio · lmax`.
pub fn lambda_grid(lmax: f64, n_lambdas: usize, ratio: f64) -> Vec<f64> {
    if n_lambdas == 1 {
        return vec![lmax];
    }
    let (hi, lo) = (lmax.ln(), (lmax * ratio).ln());
    (0..n_lambdas)
        .map(|k| {
            if k == 0 {
                lmax
            } else {
                (hi + (lo - hi) * k as f64 / (n_lambdas - 1) as f64).exp()
            }
        })
        .collect()
}

/// Models along a decreasing penalty grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationPath {
    pub lambdas: Vec<f64>,
    pub models: Vec<LinearModel>,
    pub nonzero_counts: Vec<usize>,
}

impl RegularizationPath {
    /// `lambda, nonzero_count, <one column per feature coefficient>`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let names = self.models.first().map(|m| m.feature_names.clone()).unwrap_or_default();
        let mut header = vec!["lambda".to_string(), "nonzero_count".to_string()];
        header.extend(names);
        w.write_record(&header)?;
        for ((lambda, model), count) in self.lambdas.iter().zip(&self.models).zip(&self.nonzero_counts) {
            let mut rec = vec![format!("{lambda}"), count.to_string()];
            rec.extend(model.coefficients.iter().map(|b| format!("{b}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn path_on(problem: &Problem, lambdas: &[f64], opts: &FitOptions) -> RegularizationPath {
    let mut models: Vec<LinearModel> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (m, _) = problem.fit(lambda, opts, models.last());
        models.push(m);
    }
    let nonzero_counts = models.iter().map(LinearModel::nonzero_count).collect();
    RegularizationPath {
        lambdas: lambdas.to_vec(),
        models,
        nonzero_counts,
    }
}

/// Warm-started fits over a log-spaced grid from λ_max down to
/// `ratio · λ_max`.
pub fn lambda_path(
    x: &FeatureMatrix,
    y: &[u8],
    n_lambdas: usize,
    ratio: f64,
    opts: &FitOptions,
) -> Result<RegularizationPath> {
    if n_lambdas == 0 || !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Domain(format!(
            "need n_lambdas >= 1 and ratio in (0, 1), got {n_lambdas} and {ratio}"
        )));
    }
    let problem = Problem::new(x, y)?;
    let grid = lambda_grid(problem.lambda_max(), n_lambdas, ratio);
    Ok(path_on(&problem, &grid, opts))
}

/// Warm-started fits on a caller-supplied decreasing grid.
pub fn path_on_grid(x: &FeatureMatrix, y: &[u8], lambdas: &[f64], opts: &FitOptions) -> Result<RegularizationPath> {
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("lambda grid must be strictly decreasing".into()));
    }
    let problem = Problem::new(x, y)?;
    Ok(path_on(&problem, lambdas, opts))
}

/// Held-out error used to pick λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMetric {
    /// Mean binomial deviance.
    Deviance,
    /// Misclassification rate at cutoff 0.5 (probability >= 0.5 is positive).
    Misclassification,
}

#[derive(Debug, Clone)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub n_lambdas: usize,
    pub ratio: f64,
    pub metric: CvMetric,
    pub fit: FitOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            k: 10,
            seed: DEFAULT_SEED,
            n_lambdas: 100,
            ratio: 0.01,
            metric: CvMetric::Deviance,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    pub mean_cv_error: Vec<f64>,
    pub se_cv_error: Vec<f64>,
    pub metric: CvMetric,
    pub index_min: usize,
    pub index_1se: usize,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    /// Nonzero features of the full-data fit at `lambda_min`.
    pub selected_features: Vec<String>,
    /// Full-data path on the same grid.
    pub path: RegularizationPath,
}

impl CvResult {
    pub fn model_min(&self) -> &LinearModel {
        &self.path.models[self.index_min]
    }

    /// `lambda, log_lambda, mean_error, se_error, nonzero_count`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lambda", "log_lambda", "mean_error", "se_error", "nonzero_count"])?;
        for k in 0..self.lambdas.len() {
            w.write_record([
                format!("{}", self.lambdas[k]),
                format!("{}", self.lambdas[k].ln()),
                format!("{}", self.mean_cv_error[k]),
                format!("{}", self.se_cv_error[k]),
                self.path.nonzero_counts[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn held_out_error(metric: CvMetric, model: &LinearModel, x: &FeatureMatrix, y: &[u8]) -> f64 {
    let n = y.len() as f64;
    match metric {
        CvMetric::Deviance => {
            let ll: f64 = x
                .rows()
                .zip(y)
                .map(|(row, &yi)| {
                    let p = sigmoid(model.margin(row)).clamp(1e-15, 1.0 - 1e-15);
                    if yi == 1 {
                        p.ln()
                    } else {
                        (1.0 - p).ln()
                    }
                })
                .sum();
            -2.0 * ll / n
        }
        CvMetric::Misclassification => {
            let wrong = x
                .rows()
                .zip(y)
                .filter(|(row, &yi)| (sigmoid(model.margin(row)) >= 0.5) != (yi == 1))
                .count();
            wrong as f64 / n
        }
    }
}

/// Picks λ by stratified k-fold cross-validation.
pub fn cv_select_lambda(x: &FeatureMatrix, y: &[u8], opts: &CvOptions) -> Result<CvResult> {
    cv_select_lambda_with(x, y, opts, Execution::default())
}

/// As [`cv_select_lambda`], scheduling folds with `exec`.
pub fn cv_select_lambda_with(x: &FeatureMatrix, y: &[u8], opts: &CvOptions, exec: Execution) -> Result<CvResult> {
    let full = Problem::new(x, y)?;
    if opts.n_lambdas == 0 || !(opts.ratio > 0.0 && opts.ratio < 1.0) {
        return Err(Error::Domain("invalid lambda grid settings".into()));
    }
    let grid = lambda_grid(full.lambda_max(), opts.n_lambdas, opts.ratio);
    let plan = stratified_kfold(y, opts.k, opts.seed)?;

    let fold_errors: Vec<Vec<f64>> = exec.try_map(opts.k, |f| -> Result<Vec<f64>> {
        let train = plan.train_indices(f);
        let test = plan.test_indices(f);
        let ytr: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let yte: Vec<u8> = test.iter().map(|&i| y[i]).collect();
        let problem = Problem::new(&x.select_rows(&train), &ytr)?;
        let path = path_on(&problem, &grid, &opts.fit);
        let xte = x.select_rows(&test);
        Ok(path
            .models
            .iter()
            .map(|m| held_out_error(opts.metric, m, &xte, &yte))
            .collect())
    })?;

    let k = opts.k as f64;
    let mut mean_cv_error = Vec::with_capacity(grid.len());
    let mut se_cv_error = Vec::with_capacity(grid.len());
    for l in 0..grid.len() {
        let errs: Vec<f64> = fold_errors.iter().map(|e| e[l]).collect();
        let m = errs.iter().sum::<f64>() / k;
        let var = errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (k - 1.0);
        mean_cv_error.push(m);
        se_cv_error.push((var / k).sqrt());
    }
    // first minimum along the decreasing grid, i.e. the largest minimising λ
    let index_min = (0..grid.len()).fold(0, |best, l| {
        if mean_cv_error[l] < mean_cv_error[best] {
            l
        } else {
            best
        }
    });
    let bound = mean_cv_error[index_min] + se_cv_error[index_min];
    let index_1se = (0..=index_min)
        .find(|&l| mean_cv_error[l] <= bound)
        .unwrap_or(index_min);

    let path = path_on(&full, &grid, &opts.fit);
    let selected_features = path.models[index_min].nonzero_features();
    Ok(CvResult {
        lambda_min: grid[index_min],
        lambda_1se: grid[index_1se],
        lambdas: grid,
        mean_cv_error,
        se_cv_error,
        metric: opts.metric,
        index_min,
        index_1se,
        selected_features,
        path,
    })
}

//! Load → preprocess → baseline table → LASSO selection → grid search →
//! held-out evaluation → TreeSHAP, writing one report directory.

use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use dnrisk::cohort::{
    baseline_table, derive_clinical_flags, derive_egfr, drop_constant_features, drop_incomplete_rows,
    drop_sparse_features, load_csv, one_hot, ClinicalColumns, ColumnKind, Dataset, LoadOptions, Scaler, Schema,
};
use dnrisk::evaluation::{
    accuracy_at_cutoff, calibration_curve, delong_test, fit_platt, net_benefit_curve, roc_points, Binning,
    CalibrationOptions, DelongResult, PlattScaling,
};
use dnrisk::explain::{
    dependence_slice, describe_color_split, importance_ranking, shap_interactions_with, tree_shap_with, ColorSplit,
    ShapMatrix,
};
use dnrisk::lasso::{cv_select_lambda_with, CvMetric, CvOptions, FitOptions};
use dnrisk::learners::{self, Family, FittedModel, Hyperparams};
use dnrisk::rng::derive_seed;
use dnrisk::selection::{grid_search, stratified_kfold, GridOptions, GridResult};
use dnrisk::synth::{self, CohortSpec};
use dnrisk::{Execution, FeatureMatrix};

use crate::config::PipelineConfig;
use crate::report::ReportWriter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Load,
    Preprocess,
    Baseline,
    Split,
    Lasso,
    GridSearch,
    Evaluate,
    Explain,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().expect("stage is a string"))
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {:#}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> AtStage<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|e| StageError { stage, error: e.into() })
    }
}

/// Held-out results of one learner family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: Family,
    pub params: Hyperparams,
    pub cv_mean_auc: f64,
    pub cv_mean_accuracy: f64,
    pub test_auc: f64,
    pub test_accuracy: f64,
    /// Thresholds where the model beats both reference strategies.
    pub dca_useful_range: Option<[f64; 2]>,
    /// Fitted on the training out-of-fold predictions.
    pub recalibration: PlattScaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecovery {
    pub signal_features: Vec<String>,
    pub recovered: Vec<String>,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub n_rows: usize,
    /// Feature columns after preprocessing, before one-hot encoding.
    pub n_features: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub lambda_min: f64,
    pub selected_features: Vec<String>,
    pub families: Vec<FamilySummary>,
    /// Highest cross-validated AUC.
    pub best_family: Family,
    /// Tree family explained with TreeSHAP (highest CV AUC among trees).
    pub explained_family: Option<Family>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SignalRecovery>,
}

impl RunSummary {
    pub fn family(&self, family: Family) -> Option<&FamilySummary> {
        self.families.iter().find(|f| f.family == family)
    }
}

/// The model artifact consumed by `explain` and `figures`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub family: Family,
    pub params: Hyperparams,
    pub feature_names: Vec<String>,
    pub model: FittedModel,
}

struct Loaded {
    ds: Dataset,
    spec: Option<CohortSpec>,
}

fn load(cfg: &PipelineConfig, out: &mut ReportWriter) -> Result<Loaded> {
    if let Some(src) = &cfg.input.synthetic {
        let mut spec = if src == "default" {
            CohortSpec::default_spec()
        } else {
            CohortSpec::load(src).with_context(|| format!("loading cohort spec {src}"))?
        };
        spec.seed = cfg.seed;
        let ds = synth::generate_cohort(&spec)?;
        let checks = synth::validate_marginals(&ds, &spec)?;
        out.csv("synth_marginals.csv", |w| {
            w.write_record(["feature", "group", "statistic", "expected", "observed", "z", "flagged"])?;
            for c in &checks {
                w.write_record([
                    c.feature.clone(),
                    c.group.to_string(),
                    c.statistic.clone(),
                    c.expected.to_string(),
                    c.observed.to_string(),
                    c.z.to_string(),
                    c.flagged.to_string(),
                ])?;
            }
            Ok(())
        })?;
        out.bytes("cohort.csv", &dataset_csv(&ds)?)?;
        out.bytes("schema.toml", ds.schema().to_toml_string()?.as_bytes())?;
        return Ok(Loaded { ds, spec: Some(spec) });
    }
    let csv = cfg.input.csv.as_ref().expect("validated input");
    let schema_path = cfg
        .input
        .schema
        .as_ref()
        .ok_or_else(|| anyhow!("csv input requires a schema file"))?;
    let schema = Schema::load(schema_path).with_context(|| format!("loading schema {}", schema_path.display()))?;
    let ds = load_csv(csv, &schema, &LoadOptions::default())?;
    Ok(Loaded { ds, spec: None })
}

pub fn dataset_csv(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)?;
    Ok(buf)
}

fn preprocess(cfg: &PipelineConfig, ds: &Dataset, out: &mut ReportWriter) -> Result<Dataset> {
    let mut ds = ds.clone();
    if let Some(d) = &cfg.preprocess.derive {
        let cols = ClinicalColumns {
            weight: d.weight.clone(),
            height: d.height.clone(),
            hba1c: d.hba1c.clone(),
            hdl: d.hdl.clone(),
            sex: d.sex.clone(),
        };
        ds = derive_clinical_flags(&ds, &cols)?;
        if let (Some(scr), Some(age), Some(sex)) = (&d.scr, &d.age, &d.sex) {
            ds = derive_egfr(&ds, scr, age, sex, "eGFR")?;
        }
    }
    ds = drop_sparse_features(&ds, cfg.preprocess.max_missing_fraction)?;
    ds = drop_incomplete_rows(&ds)?;
    let (ds, _) = drop_constant_features(&ds)?;
    out.json(
        "preprocessing.json",
        &json!({
            "n_rows": ds.n_rows(),
            "n_features": ds.feature_indices().len(),
            "features": ds.feature_indices().iter().map(|&j| ds.column(j).name.clone()).collect::<Vec<_>>(),
            "log": ds.provenance(),
        }),
    )?;
    Ok(ds)
}

struct Split {
    x_train: FeatureMatrix,
    x_test: FeatureMatrix,
    y_train: Vec<u8>,
    y_test: Vec<u8>,
    continuous: Vec<bool>,
    scaler: Scaler,
}

fn split(cfg: &PipelineConfig, ds: &Dataset, out: &mut ReportWriter) -> Result<Split> {
    let encoded = one_hot(ds)?;
    let continuous: Vec<bool> = encoded
        .feature_indices()
        .iter()
        .map(|&j| encoded.column(j).kind == ColumnKind::Continuous)
        .collect();
    let (x, y) = encoded.design_matrix()?;
    let plan = stratified_kfold(&y, cfg.preprocess.holdout_folds, derive_seed(cfg.seed, "holdout"))?;
    let test = plan.test_indices(0);
    let train = plan.train_indices(0);
    if train.iter().any(|i| test.binary_search(i).is_ok()) {
        bail!("train and test rows overlap");
    }
    out.csv("split.csv", |w| {
        w.write_record(["row", "set"])?;
        for (i, &f) in plan.assignments.iter().enumerate() {
            w.write_record([i.to_string(), if f == 0 { "test" } else { "train" }.to_string()])?;
        }
        Ok(())
    })?;
    let x_train = x.select_rows(&train);
    let scaler = Scaler::fit_matrix(&x_train, &continuous);
    out.json("scaler.json", &scaler)?;
    Ok(Split {
        y_train: train.iter().map(|&i| y[i]).collect(),
        y_test: test.iter().map(|&i| y[i]).collect(),
        x_test: x.select_rows(&test),
        x_train,
        continuous,
        scaler,
    })
}

struct Fitted {
    family: Family,
    grid: GridResult,
    model: FittedModel,
    test_probs: Vec<f64>,
}

fn family_grid(cfg: &PipelineConfig, family: Family) -> Option<Vec<Hyperparams>> {
    let g = &cfg.grid;
    match family {
        Family::Gbdt => g.gbdt.as_ref().map(|g| g.expand()),
        Family::RandomForest => g.random_forest.as_ref().map(|g| g.expand()),
        Family::DecisionTree => g.decision_tree.as_ref().map(|g| g.expand()),
        Family::Logistic => g.logistic.as_ref().map(|g| g.expand()),
    }
}

/// Runs the full workflow, writing every artifact under `out_dir`. On
/// failure the artifacts written so far are kept and the manifest records
/// the failing stage.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    out_dir: &Path,
    exec: Execution,
) -> std::result::Result<RunSummary, StageError> {
    let mut out = ReportWriter::create(out_dir).at(Stage::Load)?;
    let result = run_stages(cfg, &mut out, exec);
    let manifest = match &result {
        Ok(_) => out.finish(cfg, None),
        Err(e) => out.finish(cfg, Some(e)),
    };
    let summary = result?;
    manifest.at(Stage::Explain)?;
    Ok(summary)
}

fn run_stages(
    cfg: &PipelineConfig,
    out: &mut ReportWriter,
    exec: Execution,
) -> std::result::Result<RunSummary, StageError> {
    let loaded = load(cfg, out).at(Stage::Load)?;
    let ds = preprocess(cfg, &loaded.ds, out).at(Stage::Preprocess)?;
    let n_features = ds.feature_indices().len();

    (|| -> Result<()> {
        let table = baseline_table(&ds, cfg.preprocess.welch)?;
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        out.bytes("baseline_table.csv", &buf)
    })()
    .at(Stage::Baseline)?;

    let sp = split(cfg, &ds, out).at(Stage::Split)?;
    let z_train = sp.scaler.apply_matrix(&sp.x_train).at(Stage::Split)?;
    let z_test = sp.scaler.apply_matrix(&sp.x_test).at(Stage::Split)?;

    let cv = (|| -> Result<_> {
        let opts = CvOptions {
            k: cfg.lasso.k,
            seed: cfg.seed,
            n_lambdas: cfg.lasso.n_lambdas,
            ratio: cfg.lasso.ratio,
            metric: CvMetric::Deviance,
            fit: FitOptions::default(),
        };
        let cv = cv_select_lambda_with(&z_train, &sp.y_train, &opts, exec)?;
        let mut buf = Vec::new();
        cv.path.write_csv(&mut buf)?;
        out.bytes("lasso_path.csv", &buf)?;
        let mut buf = Vec::new();
        cv.write_csv(&mut buf)?;
        out.bytes("cv_curve.csv", &buf)?;
        let m = cv.model_min();
        out.json(
            "lasso.json",
            &json!({
                "lambda_min": cv.lambda_min,
                "lambda_1se": cv.lambda_1se,
                "selected_features": cv.selected_features,
                "intercept": m.intercept,
                "coefficients": m.feature_names.iter().zip(&m.coefficients)
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(n, c)| json!({"feature": n, "coefficient": c}))
                    .collect::<Vec<_>>(),
            }),
        )?;
        if cv.selected_features.is_empty() {
            bail!("LASSO selected no features at lambda_min");
        }
        Ok(cv)
    })()
    .at(Stage::Lasso)?;
    let selected = cv.selected_features.clone();

    let fitted = (|| -> Result<Vec<Fitted>> {
        let x_sel = sp.x_train.select_named(&selected)?;
        let z_sel = z_train.select_named(&selected)?;
        let zt_sel = z_test.select_named(&selected)?;
        let mask: Vec<bool> = selected
            .iter()
            .map(|n| sp.continuous[sp.x_train.column_index(n).expect("selected from these columns")])
            .collect();
        let mut fitted = Vec::new();
        let mut grid_csv = csv::Writer::from_writer(Vec::new());
        for family in Family::ALL {
            let Some(grid) = family_grid(cfg, family) else {
                continue;
            };
            let opts = GridOptions {
                k: cfg.grid.k,
                seed: cfg.seed,
                standardize: Some(mask.clone()),
                exec,
            };
            let result = grid_search(&grid, &x_sel, &sp.y_train, &opts)?;
            result.write_csv(&mut grid_csv, fitted.is_empty())?;
            let best = result
                .best_candidate()
                .ok_or_else(|| anyhow!("every {family} candidate failed"))?;
            let model = learners::fit(
                &best.params,
                &z_sel,
                &sp.y_train,
                derive_seed(cfg.seed, family.tag()),
                exec,
            )?;
            let test_probs = model.predict_proba(&zt_sel)?;
            fitted.push(Fitted {
                family,
                grid: result,
                model,
                test_probs,
            });
        }
        out.bytes("grid_results.csv", &grid_csv.into_inner().map_err(|e| anyhow!("{e}"))?)?;
        for f in &fitted {
            out.json(
                &format!("models/{}.json", f.family.tag()),
                &ModelArtifact {
                    family: f.family,
                    params: f.grid.best_candidate().expect("checked").params.clone(),
                    feature_names: selected.clone(),
                    model: f.model.clone(),
                },
            )?;
        }
        Ok(fitted)
    })()
    .at(Stage::GridSearch)?;

    let families = evaluate(cfg, &sp.y_train, &sp.y_test, &fitted, out, exec).at(Stage::Evaluate)?;

    let best_family = families
        .iter()
        .fold(None::<&FamilySummary>, |b, f| match b {
            Some(b) if b.cv_mean_auc >= f.cv_mean_auc => Some(b),
            _ => Some(f),
        })
        .expect("at least one family")
        .family;
    let explained = fitted
        .iter()
        .filter(|f| f.family.is_tree())
        .fold(None::<&Fitted>, |b, f| match b {
            Some(b) if cv_auc(b) >= cv_auc(f) => Some(b),
            _ => Some(f),
        });

    if let Some(f) = explained {
        explain(cfg, f, &selected, &sp, &z_test, out, exec).at(Stage::Explain)?;
    }

    let synthetic = loaded.spec.as_ref().map(|spec| {
        let signal = synth::signal_features(spec);
        let enc = one_hot(&ds).expect("encoded during split");
        let recovered: Vec<String> = signal
            .iter()
            .filter(|s| {
                selected.iter().any(|c| {
                    enc.column_index(c)
                        .is_some_and(|j| synth::column_source(enc.column(j)) == s.as_str())
                })
            })
            .cloned()
            .collect();
        SignalRecovery {
            recall: if signal.is_empty() {
                1.0
            } else {
                recovered.len() as f64 / signal.len() as f64
            },
            signal_features: signal,
            recovered,
        }
    });

    let summary = RunSummary {
        seed: cfg.seed,
        n_rows: ds.n_rows(),
        n_features,
        n_train: sp.y_train.len(),
        n_test: sp.y_test.len(),
        lambda_min: cv.lambda_min,
        selected_features: selected,
        families,
        best_family,
        explained_family: explained.map(|f| f.family),
        synthetic,
    };
    out.json("eval_summary.json", &summary).at(Stage::Evaluate)?;
    Ok(summary)
}

fn cv_auc(f: &Fitted) -> f64 {
    f.grid
        .best_candidate()
        .and_then(|c| c.mean_auc)
        .unwrap_or(f64::NEG_INFINITY)
}

fn evaluate(
    cfg: &PipelineConfig,
    y_train: &[u8],
    y_test: &[u8],
    fitted: &[Fitted],
    out: &mut ReportWriter,
    exec: Execution,
) -> Result<Vec<FamilySummary>> {
    let thresholds = cfg.dca_thresholds();
    let cal_opts = CalibrationOptions {
        n_bins: cfg.evaluation.calibration_bins,
        n_bootstrap: cfg.evaluation.n_bootstrap,
        seed: cfg.seed,
        binning: Binning::Quantile,
        exec,
    };
    let mut summaries = Vec::new();
    let mut dca = csv::Writer::from_writer(Vec::new());
    dca.write_record(["threshold", "series", "net_benefit"])?;
    let mut cal = csv::Writer::from_writer(Vec::new());
    cal.write_record([
        "series",
        "bin",
        "mean_predicted",
        "observed",
        "count",
        "ci_low",
        "ci_high",
    ])?;
    let mut treat_written = false;

    for f in fitted {
        let tag = f.family.tag();
        let roc = roc_points(y_test, &f.test_probs)?;
        let mut buf = Vec::new();
        roc.write_csv(&mut buf)?;
        out.bytes(&format!("roc_{tag}.csv"), &buf)?;

        let curve = net_benefit_curve(y_test, &f.test_probs, &thresholds)?;
        if !treat_written {
            for (i, t) in curve.thresholds.iter().enumerate() {
                dca.write_record([t.to_string(), "treat_all".into(), curve.treat_all[i].to_string()])?;
            }
            for (i, t) in curve.thresholds.iter().enumerate() {
                dca.write_record([t.to_string(), "treat_none".into(), curve.treat_none[i].to_string()])?;
            }
            treat_written = true;
        }
        for (i, t) in curve.thresholds.iter().enumerate() {
            dca.write_record([t.to_string(), tag.to_string(), curve.model[i].to_string()])?;
        }
        let useful = curve.useful_thresholds();

        let best = f.grid.best_candidate().expect("checked in grid search");
        let platt = fit_platt(y_train, &best.oof_predictions)?;
        let report = calibration_curve(y_test, &f.test_probs, &cal_opts)?;
        report.write_rows(&mut cal, tag)?;
        let recal_probs = platt.apply_all(&f.test_probs);
        let mut recal = calibration_curve(y_test, &recal_probs, &cal_opts)?;
        recal.recalibration = Some(platt.clone());
        recal.write_rows(&mut cal, &format!("{tag}_recalibrated"))?;

        summaries.push(FamilySummary {
            family: f.family,
            params: best.params.clone(),
            cv_mean_auc: best.mean_auc.expect("best candidate has an AUC"),
            cv_mean_accuracy: best.mean_accuracy.expect("best candidate has an accuracy"),
            test_auc: roc.auc,
            test_accuracy: accuracy_at_cutoff(y_test, &f.test_probs, 0.5),
            dca_useful_range: useful.first().zip(useful.last()).map(|(a, b)| [*a, *b]),
            recalibration: platt,
        });
    }
    out.bytes("dca.csv", &dca.into_inner().map_err(|e| anyhow!("{e}"))?)?;
    out.bytes("calibration.csv", &cal.into_inner().map_err(|e| anyhow!("{e}"))?)?;

    #[derive(Serialize)]
    struct Pair<'a> {
        model_a: &'a str,
        model_b: &'a str,
        #[serde(flatten)]
        result: DelongResult,
    }
    let mut pairs = Vec::new();
    for a in 0..fitted.len() {
        for b in a + 1..fitted.len() {
            pairs.push(Pair {
                model_a: fitted[a].family.tag(),
                model_b: fitted[b].family.tag(),
                result: delong_test(y_test, &fitted[a].test_probs, &fitted[b].test_probs)?,
            });
        }
    }
    out.json("delong.json", &pairs)?;
    Ok(summaries)
}

/// Per-feature `(value, φ)` pairs for summary plots, values in original
/// units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryFeature {
    pub feature: String,
    pub mean_abs_shap: f64,
    pub values: Vec<f64>,
    pub shap: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapSummary {
    pub family: Family,
    /// Attributions are in log-odds for boosted trees and in probability for
    /// averaging ensembles.
    pub units: String,
    pub base_value: f64,
    pub features: Vec<SummaryFeature>,
}

pub fn shap_summary(family: Family, shap: &ShapMatrix, raw: &FeatureMatrix) -> ShapSummary {
    ShapSummary {
        family,
        units: if family == Family::Gbdt {
            "log_odds"
        } else {
            "probability"
        }
        .into(),
        base_value: shap.base_value,
        features: importance_ranking(shap)
            .into_iter()
            .map(|imp| SummaryFeature {
                values: raw.column(raw.column_index(&imp.feature).expect("same columns")),
                shap: (0..shap.n_samples).map(|s| shap.get(s, imp.index)).collect(),
                feature: imp.feature,
                mean_abs_shap: imp.mean_abs_shap,
            })
            .collect(),
    }
}

pub fn write_shap_summary_csv(summary: &ShapSummary) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "feature", "mean_abs_shap"])?;
    for (r, f) in summary.features.iter().enumerate() {
        w.write_record([(r + 1).to_string(), f.feature.clone(), f.mean_abs_shap.to_string()])?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

/// Dependence slice CSV plus the descriptive colour split.
pub fn write_dependence(
    shap: &ShapMatrix,
    raw: &FeatureMatrix,
    feature: &str,
    color: &str,
) -> Result<(Vec<u8>, Option<ColorSplit>)> {
    let pts = dependence_slice(shap, raw, feature, color)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample", feature, "shap", color])?;
    for p in &pts {
        w.write_record([
            p.sample.to_string(),
            p.value.to_string(),
            p.shap.to_string(),
            p.color.to_string(),
        ])?;
    }
    Ok((
        w.into_inner().map_err(|e| anyhow!("{e}"))?,
        describe_color_split(&pts, None),
    ))
}

fn explain(
    cfg: &PipelineConfig,
    f: &Fitted,
    selected: &[String],
    sp: &Split,
    z_test: &FeatureMatrix,
    out: &mut ReportWriter,
    exec: Execution,
) -> Result<()> {
    let model = f.model.as_trees().expect("tree family");
    let z = z_test.select_named(selected)?;
    let raw = sp.x_test.select_named(selected)?;
    out.json(
        "best_model.json",
        &ModelArtifact {
            family: f.family,
            params: f.grid.best_candidate().expect("checked").params.clone(),
            feature_names: selected.to_vec(),
            model: f.model.clone(),
        },
    )?;
    out.bytes("explain_matrix.csv", &matrix_csv(&raw)?)?;

    let shap = tree_shap_with(model, &z, exec)?;
    let mut buf = Vec::new();
    shap.write_csv(&mut buf)?;
    out.bytes("shap_values.csv", &buf)?;
    let summary = shap_summary(f.family, &shap, &raw);
    out.bytes("shap_summary.csv", &write_shap_summary_csv(&summary)?)?;
    out.json("shap_summary.json", &summary)?;

    let inter = shap_interactions_with(model, &z, exec)?;
    let p = inter.n_features();
    let mut mean_abs = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["feature".to_string()];
    header.extend(selected.iter().cloned());
    mean_abs.write_record(&header)?;
    for i in 0..p {
        let mut rec = vec![selected[i].clone()];
        for j in 0..p {
            let m = (0..inter.n_samples).map(|s| inter.get(s, i, j).abs()).sum::<f64>() / inter.n_samples as f64;
            rec.push(m.to_string());
        }
        mean_abs.write_record(&rec)?;
    }
    out.bytes(
        "shap_interactions/mean_abs.csv",
        &mean_abs.into_inner().map_err(|e| anyhow!("{e}"))?,
    )?;
    let mut long = csv::Writer::from_writer(Vec::new());
    long.write_record(["sample", "feature_a", "feature_b", "value"])?;
    for s in 0..inter.n_samples {
        for i in 0..p {
            for j in i..p {
                let v = inter.get(s, i, j);
                if v != 0.0 {
                    long.write_record([s.to_string(), selected[i].clone(), selected[j].clone(), v.to_string()])?;
                }
            }
        }
    }
    out.bytes(
        "shap_interactions/values.csv",
        &long.into_inner().map_err(|e| anyhow!("{e}"))?,
    )?;

    let mut splits = Vec::new();
    for [feat, color] in &cfg.explain.dependence {
        if !selected.contains(feat) || !selected.contains(color) {
            splits.push(json!({"feature": feat, "color": color, "skipped": "feature not selected"}));
            continue;
        }
        let (bytes, split) = write_dependence(&shap, &raw, feat, color)?;
        out.bytes(
            &format!(
                "shap_interactions/dependence_{}__{}.csv",
                file_safe(feat),
                file_safe(color)
            ),
            &bytes,
        )?;
        splits.push(json!({"feature": feat, "color": color, "color_split": split}));
    }
    out.json("shap_interactions/dependence_splits.json", &splits)?;
    Ok(())
}

pub fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn matrix_csv(x: &FeatureMatrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(x.names())?;
    for row in x.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

pub fn read_matrix_csv(path: &Path) -> Result<FeatureMatrix> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let names: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(
            rec.iter()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()?,
        );
    }
    Ok(FeatureMatrix::from_rows(&rows)?.with_names(names)?)
}

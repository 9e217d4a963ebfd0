//! Exact SHAP values and interaction values for tree ensembles, with
//! importance ranking and dependence-plot data.
//!
//! Attributions are in the model's native output: log-odds for
//! `logistic_margin` ensembles, probability for `probability_average` ones.

mod brute;
mod report;
mod treeshap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::learners::TreeEnsemble;
use crate::matrix::FeatureMatrix;

pub use brute::{brute_force_interactions, brute_force_shap, coalition_value, MAX_BRUTE_FORCE_FEATURES};
pub use report::{
    dependence_slice, describe_color_split, importance_ranking, ColorSplit, DependencePoint, FeatureImportance,
};

use treeshap::{tree_shap_into, Condition};

/// Per-sample attributions plus the expected model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    pub n_samples: usize,
    pub feature_names: Vec<String>,
    /// Row-major `n_samples × n_features`.
    pub values: Vec<f64>,
    pub base_value: f64,
}

impl ShapMatrix {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn get(&self, sample: usize, feature: usize) -> f64 {
        self.values[sample * self.n_features() + feature]
    }

    pub fn row(&self, sample: usize) -> &[f64] {
        let p = self.n_features();
        &self.values[sample * p..(sample + 1) * p]
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    /// One row per sample, one column per feature, plus `base_value`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["sample".to_string(), "base_value".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for s in 0..self.n_samples {
            let mut rec = vec![s.to_string(), self.base_value.to_string()];
            rec.extend(self.row(s).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-sample symmetric feature × feature interaction matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTensor {
    pub n_samples: usize,
    pub feature_names: Vec<String>,
    /// `n_samples × n_features × n_features`, row-major.
    pub values: Vec<f64>,
}

impl InteractionTensor {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn get(&self, sample: usize, i: usize, j: usize) -> f64 {
        let p = self.n_features();
        self.values[(sample * p + i) * p + j]
    }

    pub fn matrix(&self, sample: usize) -> &[f64] {
        let p = self.n_features();
        &self.values[sample * p * p..(sample + 1) * p * p]
    }
}

fn check(model: &TreeEnsemble, x: &FeatureMatrix) -> Result<()> {
    model.validate()?;
    model.check_width(x)
}

/// Expected native output under the training covers.
pub fn base_value(model: &TreeEnsemble) -> f64 {
    let w = model.tree_weight();
    model.native_offset() + model.trees.iter().map(|t| w * t.expected_value()).sum::<f64>()
}

fn row_shap(model: &TreeEnsemble, row: &[f64], condition: Condition) -> Vec<f64> {
    let mut phi = vec![0.0; model.n_features()];
    let w = model.tree_weight();
    for t in &model.trees {
        tree_shap_into(t, row, &mut phi, w, condition);
    }
    phi
}

/// SHAP values of one row.
pub fn shap_row(model: &TreeEnsemble, row: &[f64]) -> Result<Vec<f64>> {
    model.validate()?;
    if row.len() != model.n_features() {
        return Err(Error::Shape(format!(
            "row has {} values, model has {} features",
            row.len(),
            model.n_features()
        )));
    }
    Ok(row_shap(model, row, Condition::None))
}

pub fn tree_shap(model: &TreeEnsemble, x: &FeatureMatrix) -> Result<ShapMatrix> {
    tree_shap_with(model, x, Execution::default())
}

/// As [`tree_shap`], computing rows under `exec`.
pub fn tree_shap_with(model: &TreeEnsemble, x: &FeatureMatrix, exec: Execution) -> Result<ShapMatrix> {
    check(model, x)?;
    let rows = exec.map(x.n_rows(), |i| row_shap(model, x.row(i), Condition::None));
    Ok(ShapMatrix {
        n_samples: x.n_rows(),
        feature_names: model.feature_names.clone(),
        values: rows.concat(),
        base_value: base_value(model),
    })
}

fn row_interactions(model: &TreeEnsemble, row: &[f64]) -> Vec<f64> {
    let p = model.n_features();
    let w = model.tree_weight();
    let phi = row_shap(model, row, Condition::None);
    let mut raw = vec![0.0; p * p];
    let mut on = vec![0.0; p];
    let mut off = vec![0.0; p];
    for t in &model.trees {
        // features absent from a tree contribute no interaction through it
        for j in t.used_features() {
            on.fill(0.0);
            off.fill(0.0);
            tree_shap_into(t, row, &mut on, w, Condition::On(j));
            tree_shap_into(t, row, &mut off, w, Condition::Off(j));
            for k in 0..p {
                if k != j {
                    raw[j * p + k] += (on[k] - off[k]) / 2.0;
                }
            }
        }
    }
    let mut out = vec![0.0; p * p];
    for j in 0..p {
        let mut off_diag = 0.0;
        for k in 0..p {
            if k != j {
                let v = (raw[j * p + k] + raw[k * p + j]) / 2.0;
                out[j * p + k] = v;
                off_diag += v;
            }
        }
        out[j * p + j] = phi[j] - off_diag;
    }
    out
}

pub fn shap_interactions(model: &TreeEnsemble, x: &FeatureMatrix) -> Result<InteractionTensor> {
    shap_interactions_with(model, x, Execution::default())
}

/// As [`shap_interactions`], computing rows under `exec`.
pub fn shap_interactions_with(model: &TreeEnsemble, x: &FeatureMatrix, exec: Execution) -> Result<InteractionTensor> {
    check(model, x)?;
    let mats = exec.map(x.n_rows(), |i| row_interactions(model, x.row(i)));
    Ok(InteractionTensor {
        n_samples: x.n_rows(),
        feature_names: model.feature_names.clone(),
        values: mats.concat(),
    })
}

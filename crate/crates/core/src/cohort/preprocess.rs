use serde::{Deserialize, Serialize};

use crate::cohort::dataset::Dataset;
use crate::cohort::schema::{ColumnKind, ColumnSpec};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Removes feature columns whose missing fraction is strictly greater than
/// `threshold`. The target column is never removed.
pub fn drop_sparse_features(ds: &Dataset, threshold: f64) -> Result<Dataset> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Domain(format!(
            "missing-fraction threshold must be in (0, 1], got {threshold}"
        )));
    }
    let n = ds.n_rows().max(1) as f64;
    let mut keep = vec![true; ds.n_cols()];
    let mut dropped = Vec::new();
    for j in ds.feature_indices() {
        if ds.missing_count(j) as f64 / n > threshold {
            keep[j] = false;
            dropped.push(ds.column(j).name.clone());
        }
    }
    if !ds.feature_indices().iter().any(|&j| keep[j]) {
        return Err(Error::EmptyFeatureSet);
    }
    let mut out = ds.retain_columns(&keep);
    out.log(format!(
        "drop_sparse_features(threshold={threshold}): dropped {} [{}]",
        dropped.len(),
        dropped.join(", ")
    ));
    Ok(out)
}

/// Removes every row with at least one masked cell.
pub fn drop_incomplete_rows(ds: &Dataset) -> Result<Dataset> {
    let rows: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| (0..ds.n_cols()).all(|j| !ds.is_missing(i, j)))
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let removed = ds.n_rows() - rows.len();
    let mut out = ds.select_rows(&rows);
    out.log(format!("drop_incomplete_rows: removed {removed} rows"));
    Ok(out)
}

/// Removes continuous features with zero sample variance in `ds`.
pub fn drop_constant_features(ds: &Dataset) -> Result<(Dataset, Vec<String>)> {
    let mut keep = vec![true; ds.n_cols()];
    let mut dropped = Vec::new();
    for j in ds.feature_indices() {
        if ds.column(j).kind == ColumnKind::Continuous {
            let obs = ds.observed(j);
            if obs.len() < 2 || sample_sd(&obs) == 0.0 {
                keep[j] = false;
                dropped.push(ds.column(j).name.clone());
            }
        }
    }
    if !ds.feature_indices().iter().any(|&j| keep[j]) {
        return Err(Error::EmptyFeatureSet);
    }
    let mut out = ds.retain_columns(&keep);
    out.log(format!(
        "drop_constant_features: dropped {} [{}]",
        dropped.len(),
        dropped.join(", ")
    ));
    Ok((out, dropped))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 divisor).
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// Z-score parameters of one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

/// Per-feature z-score table fitted on training data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub columns: Vec<ColumnScaler>,
}

impl Scaler {
    pub fn get(&self, name: &str) -> Option<&ColumnScaler> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Fits the continuous columns of a complete dataset.
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.has_missing() {
            return Err(Error::Domain("standardization requires a complete training set".into()));
        }
        let mut columns = Vec::new();
        for j in train.feature_indices() {
            let col = train.column(j);
            if col.kind != ColumnKind::Continuous {
                continue;
            }
            let xs = train.observed(j);
            if xs.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "`{}` needs at least two rows to standardize",
                    col.name
                )));
            }
            let sd = sample_sd(&xs);
            if sd == 0.0 || !sd.is_finite() {
                return Err(Error::ConstantFeature(col.name.clone()));
            }
            columns.push(ColumnScaler {
                name: col.name.clone(),
                mean: mean(&xs),
                sd,
            });
        }
        Ok(Self { columns })
    }

    /// Fits the flagged columns of a matrix. Zero-variance columns are only
    /// centred (sd reported as 1) so that cross-validation folds in which a
    /// rare value is absent still work.
    pub fn fit_matrix(x: &FeatureMatrix, continuous: &[bool]) -> Self {
        let columns = (0..x.n_cols())
            .filter(|&j| continuous[j])
            .map(|j| {
                let xs = x.column(j);
                let sd = if xs.len() < 2 { 0.0 } else { sample_sd(&xs) };
                ColumnScaler {
                    name: x.names()[j].clone(),
                    mean: mean(&xs),
                    sd: if sd > 0.0 && sd.is_finite() { sd } else { 1.0 },
                }
            })
            .collect();
        Self { columns }
    }

    /// Applies the table to matching columns of `ds`.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let mut data = ds.to_columns();
        for sc in &self.columns {
            let j = ds.require_column(&sc.name)?;
            for v in data[j].iter_mut().flatten() {
                *v = (*v - sc.mean) / sc.sd;
            }
        }
        let mut out = Dataset::from_columns(ds.columns().to_vec(), data, ds.provenance().to_vec())?;
        out.log(format!("standardize: {} continuous columns", self.columns.len()));
        Ok(out)
    }

    /// Applies the table to matching columns of a matrix.
    pub fn apply_matrix(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut out = x.clone();
        for sc in &self.columns {
            let j = x
                .column_index(&sc.name)
                .ok_or_else(|| Error::UnknownFeature(sc.name.clone()))?;
            for i in 0..x.n_rows() {
                out.set(i, j, (x.get(i, j) - sc.mean) / sc.sd);
            }
        }
        Ok(out)
    }

    /// The entries for `names` only, e.g. the columns a model was fitted on.
    pub fn restricted_to(&self, names: &[String]) -> Self {
        Self {
            columns: self
                .columns
                .iter()
                .filter(|c| names.contains(&c.name))
                .cloned()
                .collect(),
        }
    }

    /// Maps a standardized value back to original units.
    pub fn invert(&self, name: &str, z: f64) -> f64 {
        self.get(name).map_or(z, |sc| z * sc.sd + sc.mean)
    }
}

/// Z-scores the continuous columns of `apply_to` with statistics from
/// `train`.
pub fn standardize(train: &Dataset, apply_to: &Dataset) -> Result<(Dataset, Scaler)> {
    let scaler = Scaler::fit(train)?;
    let out = scaler.apply(apply_to)?;
    Ok((out, scaler))
}

/// Replaces each categorical column with one 0/1 indicator per category,
/// named `column=category`. All k indicators are kept.
pub fn one_hot(ds: &Dataset) -> Result<Dataset> {
    let mut columns = Vec::new();
    let mut data = Vec::new();
    let mut expanded = 0;
    for (j, col) in ds.columns().iter().enumerate() {
        if col.kind != ColumnKind::Categorical {
            columns.push(col.clone());
            data.push((0..ds.n_rows()).map(|i| ds.value(i, j)).collect());
            continue;
        }
        expanded += 1;
        for (k, cat) in col.categories.iter().enumerate() {
            columns.push(ColumnSpec {
                name: format!("{}={}", col.name, cat),
                kind: ColumnKind::Binary,
                categories: Vec::new(),
                unit: None,
                origin: Some(col.name.clone()),
            });
            data.push(
                (0..ds.n_rows())
                    .map(|i| ds.value(i, j).map(|v| if v as usize == k { 1.0 } else { 0.0 }))
                    .collect(),
            );
        }
    }
    let mut out = Dataset::from_columns(columns, data, ds.provenance().to_vec())?;
    out.log(format!("one_hot: expanded {expanded} categorical columns"));
    Ok(out)
}

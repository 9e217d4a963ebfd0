use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

use super::ShapMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub index: usize,
    pub mean_abs_shap: f64,
}

/// Features by descending mean |φ|; ties keep the lower feature index first.
pub fn importance_ranking(shap: &ShapMatrix) -> Vec<FeatureImportance> {
    let n = shap.n_samples.max(1) as f64;
    let mut out: Vec<FeatureImportance> = (0..shap.n_features())
        .map(|j| FeatureImportance {
            feature: shap.feature_names[j].clone(),
            index: j,
            mean_abs_shap: (0..shap.n_samples).map(|s| shap.get(s, j).abs()).sum::<f64>() / n,
        })
        .collect();
    out.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap).then(a.index.cmp(&b.index)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependencePoint {
    pub sample: usize,
    pub value: f64,
    pub shap: f64,
    pub color: f64,
}

/// `(value, φ, colour value)` per sample, sorted by value (stable in sample
/// order).
pub fn dependence_slice(
    shap: &ShapMatrix,
    x: &FeatureMatrix,
    feature: &str,
    color_feature: &str,
) -> Result<Vec<DependencePoint>> {
    if x.n_rows() != shap.n_samples {
        return Err(Error::Shape(format!(
            "{} rows but {} SHAP samples",
            x.n_rows(),
            shap.n_samples
        )));
    }
    let j = shap.feature_index(feature)?;
    let xj = x
        .column_index(feature)
        .ok_or_else(|| Error::UnknownFeature(feature.to_string()))?;
    let c = x
        .column_index(color_feature)
        .ok_or_else(|| Error::UnknownFeature(color_feature.to_string()))?;
    let mut pts: Vec<DependencePoint> = (0..shap.n_samples)
        .map(|s| DependencePoint {
            sample: s,
            value: x.get(s, xj),
            shap: shap.get(s, j),
            color: x.get(s, c),
        })
        .collect();
    pts.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(pts)
}

/// Descriptive split of a dependence slice by its colour value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorSplit {
    pub threshold: f64,
    pub n_below: usize,
    pub n_above: usize,
    pub mean_shap_below: f64,
    pub mean_shap_above: f64,
    /// Between-group sum of squares of φ explained by the split.
    pub between_ss: f64,
}

/// Colour threshold that best separates the φ values of the points with
/// `value >= min_value`: the single split maximising the between-group sum
/// of squares, at a midpoint between distinct colour values. A reporting
/// heuristic only.
pub fn describe_color_split(points: &[DependencePoint], min_value: Option<f64>) -> Option<ColorSplit> {
    let mut pts: Vec<&DependencePoint> = points
        .iter()
        .filter(|p| min_value.map_or(true, |m| p.value >= m))
        .collect();
    pts.sort_by(|a, b| a.color.total_cmp(&b.color));
    let n = pts.len();
    let total: f64 = pts.iter().map(|p| p.shap).sum();
    let mut best: Option<ColorSplit> = None;
    let mut left = 0.0;
    for i in 0..n.saturating_sub(1) {
        left += pts[i].shap;
        let (lo, hi) = (pts[i].color, pts[i + 1].color);
        if !(hi > lo) {
            continue;
        }
        let (nl, nr) = ((i + 1) as f64, (n - i - 1) as f64);
        let (ml, mr) = (left / nl, (total - left) / nr);
        let mean = total / n as f64;
        let ss = nl * (ml - mean).powi(2) + nr * (mr - mean).powi(2);
        if best.as_ref().map_or(true, |b| ss > b.between_ss) {
            best = Some(ColorSplit {
                threshold: lo + (hi - lo) / 2.0,
                n_below: i + 1,
                n_above: n - i - 1,
                mean_shap_below: ml,
                mean_shap_above: mr,
                between_ss: ss,
            });
        }
    }
    best
}

//! Tidy plot data derived from a finished report directory.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use dnrisk::cohort::Scaler;
use dnrisk::explain::{shap_interactions_with, tree_shap_with, ShapMatrix};
use dnrisk::learners::Family;
use dnrisk::{Execution, FeatureMatrix};

use crate::pipeline::{
    file_safe, matrix_csv, read_matrix_csv, shap_summary, write_dependence, write_shap_summary_csv, ModelArtifact,
    ShapSummary,
};
use crate::report::ReportWriter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Roc,
    Dca,
    Calibration,
    ShapSummary,
    ShapDependence,
}

fn artifact(report: &Path, name: &str) -> Result<PathBuf> {
    let p = report.join(name);
    if !p.is_file() {
        bail!("missing report artifact `{name}` in {}", report.display());
    }
    Ok(p)
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| Ok(rec?.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>>>()?;
    Ok((header, rows))
}

fn column(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| anyhow!("column `{name}` not found"))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Attributions recomputed from a report's saved model and test matrix.
pub struct Explained {
    pub artifact: ModelArtifact,
    pub raw: FeatureMatrix,
    pub shap: ShapMatrix,
}

pub fn load_explained(report: &Path, exec: Execution) -> Result<Explained> {
    let text = std::fs::read_to_string(artifact(report, "best_model.json")?)?;
    let art: ModelArtifact = serde_json::from_str(&text).context("parsing best_model.json")?;
    let raw = read_matrix_csv(&artifact(report, "explain_matrix.csv")?)?;
    let scaler: Scaler = serde_json::from_str(&std::fs::read_to_string(artifact(report, "scaler.json")?)?)?;
    let raw = raw.select_named(&art.feature_names)?;
    let z = scaler.restricted_to(&art.feature_names).apply_matrix(&raw)?;
    let model = art
        .model
        .as_trees()
        .ok_or_else(|| anyhow!("best_model.json does not hold a tree ensemble"))?;
    let shap = tree_shap_with(model, &z, exec)?;
    Ok(Explained {
        artifact: art,
        raw,
        shap,
    })
}

/// Recomputes SHAP values, the summary and dependence slices from a report
/// into `out`.
pub fn explain_report(report: &Path, out: &Path, pairs: &[[String; 2]], exec: Execution) -> Result<ShapSummary> {
    let ex = load_explained(report, exec)?;
    let mut w = ReportWriter::create(out)?;
    let mut buf = Vec::new();
    ex.shap.write_csv(&mut buf)?;
    w.bytes("shap_values.csv", &buf)?;
    let summary = shap_summary(ex.artifact.family, &ex.shap, &ex.raw);
    w.bytes("shap_summary.csv", &write_shap_summary_csv(&summary)?)?;
    w.json("shap_summary.json", &summary)?;
    w.bytes("explain_matrix.csv", &matrix_csv(&ex.raw)?)?;
    for [f, c] in pairs {
        let (bytes, split) = write_dependence(&ex.shap, &ex.raw, f, c)?;
        let stem = format!("dependence_{}__{}", file_safe(f), file_safe(c));
        w.bytes(&format!("{stem}.csv"), &bytes)?;
        w.json(&format!("{stem}.json"), &split)?;
    }
    if !pairs.is_empty() {
        // interaction strength of each requested pair, for ranking slices
        let scaler: Scaler = serde_json::from_str(&std::fs::read_to_string(report.join("scaler.json"))?)?;
        let z = scaler.restricted_to(&ex.artifact.feature_names).apply_matrix(&ex.raw)?;
        let inter = shap_interactions_with(ex.artifact.model.as_trees().expect("checked"), &z, exec)?;
        let rows = pairs
            .iter()
            .map(|[f, c]| {
                let (i, j) = (ex.shap.feature_index(f)?, ex.shap.feature_index(c)?);
                let m = (0..inter.n_samples).map(|s| inter.get(s, i, j).abs()).sum::<f64>() / inter.n_samples as f64;
                Ok(vec![f.clone(), c.clone(), m.to_string()])
            })
            .collect::<Result<Vec<_>>>()?;
        write_csv(
            &out.join("pair_interactions.csv"),
            &["feature", "color", "mean_abs_interaction"],
            rows,
        )?;
    }
    Ok(summary)
}

/// Writes `figures/<figure>.csv` under the report directory and returns its
/// path.
pub fn render_figure_data(
    report: &Path,
    figure: Figure,
    dependence: Option<(&str, &str)>,
    exec: Execution,
) -> Result<PathBuf> {
    let dir = report.join("figures");
    match figure {
        Figure::Roc => {
            let mut rows = Vec::new();
            for fam in Family::ALL {
                let p = report.join(format!("roc_{}.csv", fam.tag()));
                if !p.is_file() {
                    continue;
                }
                let (h, data) = read_rows(&p)?;
                let (fi, ti) = (column(&h, "fpr")?, column(&h, "tpr")?);
                rows.extend(
                    data.into_iter()
                        .map(|r| vec![fam.tag().to_string(), r[fi].clone(), r[ti].clone()]),
                );
            }
            if rows.is_empty() {
                bail!("missing report artifact `roc_<family>.csv` in {}", report.display());
            }
            let out = dir.join("roc.csv");
            write_csv(&out, &["model", "fpr", "tpr"], rows)?;
            Ok(out)
        }
        Figure::Dca => {
            let (h, data) = read_rows(&artifact(report, "dca.csv")?)?;
            let (t, s, v) = (
                column(&h, "threshold")?,
                column(&h, "series")?,
                column(&h, "net_benefit")?,
            );
            let out = dir.join("dca.csv");
            write_csv(
                &out,
                &["series", "threshold", "net_benefit"],
                data.into_iter().map(|r| vec![r[s].clone(), r[t].clone(), r[v].clone()]),
            )?;
            Ok(out)
        }
        Figure::Calibration => {
            let (h, data) = read_rows(&artifact(report, "calibration.csv")?)?;
            let idx = ["series", "mean_predicted", "observed", "ci_low", "ci_high"]
                .iter()
                .map(|c| column(&h, c))
                .collect::<Result<Vec<_>>>()?;
            let out = dir.join("calibration.csv");
            write_csv(
                &out,
                &["series", "mean_predicted", "observed", "ci_low", "ci_high"],
                data.into_iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()),
            )?;
            Ok(out)
        }
        Figure::ShapSummary => {
            let text = std::fs::read_to_string(artifact(report, "shap_summary.json")?)?;
            let summary: ShapSummary = serde_json::from_str(&text)?;
            let out = dir.join("shap_summary.csv");
            let rows = summary.features.iter().enumerate().flat_map(|(r, f)| {
                f.values
                    .iter()
                    .zip(&f.shap)
                    .map(move |(v, s)| vec![(r + 1).to_string(), f.feature.clone(), v.to_string(), s.to_string()])
            });
            write_csv(&out, &["rank", "feature", "value", "shap"], rows.collect::<Vec<_>>())?;
            Ok(out)
        }
        Figure::ShapDependence => {
            let (f, c) = dependence.ok_or_else(|| anyhow!("shap_dependence needs --feature and --color"))?;
            let ex = load_explained(report, exec)?;
            let (bytes, _) = write_dependence(&ex.shap, &ex.raw, f, c)?;
            let out = dir.join(format!("shap_dependence_{}__{}.csv", file_safe(f), file_safe(c)));
            std::fs::create_dir_all(&dir)?;
            std::fs::write(&out, bytes)?;
            Ok(out)
        }
    }
}

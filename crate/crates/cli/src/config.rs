use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use dnrisk::selection::{ForestGrid, GbdtGrid, LogisticGrid, TreeGrid};

/// The bundled configuration: default synthetic cohort, small grids per
/// learner family.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../data/default_config.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub input: InputConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub lasso: LassoConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    /// Report directory; `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Exactly one of `csv` (with `schema`) or `synthetic` must be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    /// Cohort spec path, or `"default"` for the bundled spec.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Features missing in more than this fraction of rows are dropped.
    pub max_missing_fraction: f64,
    /// The held-out test set is one of this many stratified folds.
    pub holdout_folds: usize,
    /// Welch instead of pooled t-tests in the baseline table.
    pub welch: bool,
    pub derive: Option<DeriveConfig>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            max_missing_fraction: 0.5,
            holdout_folds: 5,
            welch: false,
            derive: None,
        }
    }
}

/// Source columns of derived clinical variables; unset entries skip the
/// variables that need them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeriveConfig {
    pub weight: Option<String>,
    pub height: Option<String>,
    pub hba1c: Option<String>,
    pub hdl: Option<String>,
    pub sex: Option<String>,
    pub scr: Option<String>,
    pub age: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LassoConfig {
    pub k: usize,
    pub n_lambdas: usize,
    pub ratio: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            k: 10,
            n_lambdas: 100,
            ratio: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "ten")]
    pub k: usize,
    pub gbdt: Option<GbdtGrid>,
    pub random_forest: Option<ForestGrid>,
    pub decision_tree: Option<TreeGrid>,
    pub logistic: Option<LogisticGrid>,
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub calibration_bins: usize,
    pub n_bootstrap: usize,
    /// Decision-curve thresholds are `i · dca_step` inside (0, 1).
    pub dca_step: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            calibration_bins: 10,
            n_bootstrap: 10_000,
            dca_step: 0.01,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainConfig {
    /// `[feature, colour feature]` pairs exported as dependence slices.
    pub dependence: Vec<[String; 2]>,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).context("parsing pipeline config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative input paths resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.input.csv.as_mut().map(rebase);
        cfg.input.schema.as_mut().map(rebase);
        if let Some(s) = cfg.input.synthetic.as_mut().filter(|s| s.as_str() != "default") {
            if Path::new(s.as_str()).is_relative() {
                *s = base.join(s.as_str()).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn bundled() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG_TOML).expect("bundled config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.input.csv, &self.input.synthetic) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => bail!("input needs exactly one of `csv` or `synthetic`"),
        }
        if self.input.synthetic.is_some() && self.input.schema.is_some() {
            bail!("`schema` only applies to csv input");
        }
        let p = &self.preprocess;
        if !(p.max_missing_fraction > 0.0 && p.max_missing_fraction <= 1.0) {
            bail!("max_missing_fraction must be in (0, 1]");
        }
        if p.holdout_folds < 2 {
            bail!("holdout_folds must be at least 2");
        }
        if self.lasso.k < 2 || self.grid.k < 2 {
            bail!("cross-validation needs k >= 2");
        }
        let g = &self.grid;
        if g.gbdt.is_none() && g.random_forest.is_none() && g.decision_tree.is_none() && g.logistic.is_none() {
            bail!("no learner grid configured");
        }
        let e = &self.evaluation;
        if e.calibration_bins == 0 || !(e.dca_step > 0.0 && e.dca_step < 1.0) {
            bail!("invalid evaluation settings");
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn dca_thresholds(&self) -> Vec<f64> {
        let step = self.evaluation.dca_step;
        (1..)
            .map(|i| (i as f64 * step * 1e9).round() / 1e9)
            .take_while(|&t| t < 1.0)
            .collect()
    }
}

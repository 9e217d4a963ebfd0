//! Seeded synthetic cohorts drawn from per-group marginals.
//!
//! Continuous features are normal per group (clipped at an optional floor),
//! categorical features multinomial per group, and the target is the group.
//! A signal weight `w` on a feature is a log-odds weight per reference SD:
//! for continuous features it shifts the group-1 mean by `w · sd0` (the
//! linear-discriminant log-odds slope of an equal-variance normal pair), for
//! categorical features it adds `w` to the group-1 log-odds of the first
//! category.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::cohort::{ColumnKind, ColumnSpec, Dataset, Schema};
use crate::error::{Error, Result};
use crate::rng::{self, DEFAULT_SEED};
use crate::{logit, sigmoid};

/// The bundled cohort specification: baseline-table marginals plus noise
/// features.
pub const DEFAULT_SPEC_TOML: &str = include_str!("../data/default_cohort.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: SynthKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    /// Group-0 and group-1 means (continuous).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loc: Option<[f64; 2]>,
    /// Group-0 and group-1 standard deviations (continuous).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<[f64; 2]>,
    /// Draws below the floor are set to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Group-0 and group-1 category proportions (categorical).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proportions: Option<[Vec<f64>; 2]>,
    #[serde(default)]
    pub missing_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub n0: usize,
    pub n1: usize,
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(rename = "feature")]
    pub features: Vec<FeatureSpec>,
    /// Feature name to log-odds weight.
    #[serde(default)]
    pub signal: BTreeMap<String, f64>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_target() -> String {
    "DN".into()
}

/// Per-group sampling parameters after the signal is applied.
#[derive(Debug, Clone, PartialEq)]
enum Marginal {
    Normal {
        mean: [f64; 2],
        sd: [f64; 2],
        floor: Option<f64>,
    },
    Multinomial {
        p: [Vec<f64>; 2],
    },
}

fn spec_err(msg: impl Into<String>) -> Error {
    Error::Spec(msg.into())
}

impl CohortSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: CohortSpec = toml::from_str(text).map_err(|e| Error::parse("cohort spec", e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn default_spec() -> Self {
        Self::from_toml_str(DEFAULT_SPEC_TOML).expect("bundled cohort spec is valid")
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::parse("cohort spec", e))
    }

    pub fn prevalence(&self) -> f64 {
        self.n1 as f64 / (self.n0 + self.n1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 < 1 || self.n1 < 1 {
            return Err(spec_err("n0 and n1 must be at least 1"));
        }
        if self.features.is_empty() {
            return Err(spec_err("no features"));
        }
        let mut names = BTreeSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) || f.name == self.target {
                return Err(spec_err(format!("duplicate column name `{}`", f.name)));
            }
            if !(0.0..1.0).contains(&f.missing_rate) {
                return Err(spec_err(format!("`{}`: missing_rate must be in [0, 1)", f.name)));
            }
            match f.kind {
                SynthKind::Continuous => {
                    let (Some(loc), Some(sd)) = (f.loc, f.sd) else {
                        return Err(spec_err(format!("`{}`: continuous features need loc and sd", f.name)));
                    };
                    if loc.iter().any(|v| !v.is_finite()) || sd.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
                        return Err(spec_err(format!("`{}`: loc must be finite and sd positive", f.name)));
                    }
                }
                SynthKind::Categorical => {
                    let Some(props) = &f.proportions else {
                        return Err(spec_err(format!("`{}`: categorical features need proportions", f.name)));
                    };
                    let unique: BTreeSet<&String> = f.categories.iter().collect();
                    if f.categories.is_empty() || unique.len() != f.categories.len() {
                        return Err(spec_err(format!(
                            "`{}`: categories must be nonempty and unique",
                            f.name
                        )));
                    }
                    for p in props {
                        if p.len() != f.categories.len() {
                            return Err(spec_err(format!("`{}`: one proportion per category", f.name)));
                        }
                        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                            return Err(spec_err(format!("`{}`: proportions must lie in [0, 1]", f.name)));
                        }
                        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                            return Err(spec_err(format!("`{}`: proportions must sum to 1", f.name)));
                        }
                    }
                }
            }
        }
        for (name, w) in &self.signal {
            if !names.contains(name.as_str()) {
                return Err(spec_err(format!("signal feature `{name}` is not declared")));
            }
            if !w.is_finite() {
                return Err(spec_err(format!("signal weight of `{name}` is not finite")));
            }
        }
        Ok(())
    }

    /// Column declarations of generated datasets: features in spec order,
    /// then the target.
    pub fn schema(&self) -> Schema {
        let mut cols: Vec<ColumnSpec> = self
            .features
            .iter()
            .map(|f| {
                let mut c = match f.kind {
                    SynthKind::Continuous => ColumnSpec::continuous(&f.name),
                    SynthKind::Categorical => ColumnSpec::categorical(&f.name, f.categories.clone()),
                };
                c.unit = f.unit.clone();
                c
            })
            .collect();
        cols.push(ColumnSpec::target(&self.target));
        Schema::new(cols).expect("validated spec yields a valid schema")
    }

    fn marginal(&self, f: &FeatureSpec) -> Marginal {
        let w = self.signal.get(&f.name).copied().unwrap_or(0.0);
        match f.kind {
            SynthKind::Continuous => {
                let (loc, sd) = (f.loc.unwrap(), f.sd.unwrap());
                Marginal::Normal {
                    mean: [loc[0], loc[1] + w * sd[0]],
                    sd,
                    floor: f.floor,
                }
            }
            SynthKind::Categorical => {
                let props = f.proportions.clone().unwrap();
                let mut p1 = props[1].clone();
                let first = p1[0];
                if w != 0.0 && first > 0.0 && first < 1.0 {
                    let shifted = sigmoid(logit(first) + w);
                    let scale = (1.0 - shifted) / (1.0 - first);
                    p1[0] = shifted;
                    p1[1..].iter_mut().for_each(|v| *v *= scale);
                }
                Marginal::Multinomial {
                    p: [props[0].clone(), p1],
                }
            }
        }
    }
}

/// Draws a cohort from `spec`; a pure function of the spec and its seed.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Dataset> {
    spec.validate()?;
    let marginals: Vec<Marginal> = spec.features.iter().map(|f| spec.marginal(f)).collect();
    let samplers: Vec<Option<[WeightedIndex<f64>; 2]>> = marginals
        .iter()
        .map(|m| match m {
            Marginal::Multinomial { p } => Some(
                [WeightedIndex::new(&p[0]), WeightedIndex::new(&p[1])].map(|w| w.map_err(|e| spec_err(e.to_string()))),
            ),
            Marginal::Normal { .. } => None,
        })
        .map(|o| o.map(|[a, b]| Ok::<_, Error>([a?, b?])).transpose())
        .collect::<Result<_>>()?;

    let n = spec.n0 + spec.n1;
    let mut draw = rng::stream(spec.seed, "synth");
    let mut rows: Vec<(Vec<f64>, u8)> = Vec::with_capacity(n);
    for (group, size) in [(0usize, spec.n0), (1, spec.n1)] {
        for _ in 0..size {
            let row = marginals
                .iter()
                .zip(&samplers)
                .map(|(m, s)| match m {
                    Marginal::Normal { mean, sd, floor } => {
                        let z: f64 = draw.sample(StandardNormal);
                        let x = mean[group] + sd[group] * z;
                        floor.map_or(x, |f| x.max(f))
                    }
                    Marginal::Multinomial { .. } => s.as_ref().unwrap()[group].sample(&mut draw) as f64,
                })
                .collect();
            rows.push((row, group as u8));
        }
    }
    rows.shuffle(&mut rng::stream(spec.seed, "synth_shuffle"));

    let mut miss = rng::stream(spec.seed, "synth_missing");
    let mut data: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(n); spec.features.len() + 1];
    for (row, y) in &rows {
        for (j, f) in spec.features.iter().enumerate() {
            let masked = f.missing_rate > 0.0 && miss.gen::<f64>() < f.missing_rate;
            data[j].push((!masked).then_some(row[j]));
        }
        data[spec.features.len()].push(Some(f64::from(*y)));
    }
    let mut ds = Dataset::from_columns(spec.schema().columns, data, Vec::new())?;
    ds.log(format!(
        "generate_cohort: seed {}, {} + {} rows, {} features, {} signal features",
        spec.seed,
        spec.n0,
        spec.n1,
        spec.features.len(),
        spec.signal.len()
    ));
    Ok(ds)
}

/// Deviation of one sample moment from its spec value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheck {
    pub feature: String,
    pub group: u8,
    /// `mean` or `p[<category>]`.
    pub statistic: String,
    pub expected: f64,
    pub observed: f64,
    pub z: f64,
    pub flagged: bool,
}

/// Level above which a deviation is flagged.
pub const MARGINAL_Z_LIMIT: f64 = 4.0;

/// Mean and sd of `max(X, floor)` for `X ~ N(mu, sigma²)`.
fn clipped_normal_moments(mu: f64, sigma: f64, floor: Option<f64>) -> (f64, f64) {
    let Some(f) = floor else {
        return (mu, sigma);
    };
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let a = (f - mu) / sigma;
    let (cdf, pdf) = (std.cdf(a), std.pdf(a));
    let mean = f * cdf + mu * (1.0 - cdf) + sigma * pdf;
    let second = f * f * cdf + (mu * mu + sigma * sigma) * (1.0 - cdf) + sigma * pdf * (mu + f);
    (mean, (second - mean * mean).max(0.0).sqrt())
}

/// Compares each group's sample means (continuous) and category shares
/// (categorical, worst category) with the spec.
pub fn validate_marginals(ds: &Dataset, spec: &CohortSpec) -> Result<Vec<MarginalCheck>> {
    let y = ds.target();
    let mut out = Vec::new();
    for f in &spec.features {
        let j = ds.require_column(&f.name)?;
        for group in [0u8, 1] {
            let xs: Vec<f64> = (0..ds.n_rows())
                .filter(|&i| y[i] == group)
                .filter_map(|i| ds.value(i, j))
                .collect();
            if xs.is_empty() {
                continue;
            }
            let n = xs.len() as f64;
            let g = usize::from(group);
            let check = match spec.marginal(f) {
                Marginal::Normal { mean, sd, floor } => {
                    let (m, s) = clipped_normal_moments(mean[g], sd[g], floor);
                    let obs = xs.iter().sum::<f64>() / n;
                    MarginalCheck {
                        feature: f.name.clone(),
                        group,
                        statistic: "mean".into(),
                        expected: m,
                        observed: obs,
                        z: if s > 0.0 { (obs - m) / (s / n.sqrt()) } else { 0.0 },
                        flagged: false,
                    }
                }
                Marginal::Multinomial { p } => {
                    let mut worst: Option<MarginalCheck> = None;
                    for (c, &pc) in p[g].iter().enumerate() {
                        let obs = xs.iter().filter(|&&v| v as usize == c).count() as f64 / n;
                        let se = (pc * (1.0 - pc) / n).sqrt();
                        let z = if se > 0.0 {
                            (obs - pc) / se
                        } else if obs == pc {
                            0.0
                        } else {
                            f64::INFINITY
                        };
                        if worst.as_ref().map_or(true, |w| z.abs() > w.z.abs()) {
                            worst = Some(MarginalCheck {
                                feature: f.name.clone(),
                                group,
                                statistic: format!("p[{}]", f.categories[c]),
                                expected: pc,
                                observed: obs,
                                z,
                                flagged: false,
                            });
                        }
                    }
                    worst.expect("at least one category")
                }
            };
            out.push(MarginalCheck {
                flagged: check.z.abs() > MARGINAL_Z_LIMIT,
                ..check
            });
        }
    }
    Ok(out)
}

/// Names of the features carrying injected signal.
pub fn signal_features(spec: &CohortSpec) -> Vec<String> {
    spec.features
        .iter()
        .filter(|f| spec.signal.get(&f.name).is_some_and(|&w| w != 0.0))
        .map(|f| f.name.clone())
        .collect()
}

/// Declared feature a (possibly one-hot) column derives from.
pub fn column_source<'a>(column: &'a ColumnSpec) -> &'a str {
    match column.kind {
        ColumnKind::Binary => column.origin.as_deref().unwrap_or(&column.name),
        _ => &column.name,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> CohortSpec {
        CohortSpec::from_toml_str(
            r#"
            seed = 5
            n0 = 40
            n1 = 30
            [[feature]]
            name = "a"
            kind = "continuous"
            loc = [1.0, 2.0]
            sd = [0.5, 0.5]
            floor = 0.0
            [[feature]]
            name = "b"
            kind = "categorical"
            categories = ["x", "y", "z"]
            proportions = [[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]]
            missing_rate = 0.1
            [signal]
            a = 1.0
            "#,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = small_spec();
        let csv = |ds: &Dataset| {
            let mut buf = Vec::new();
            ds.write_csv(&mut buf).unwrap();
            buf
        };
        let a = generate_cohort(&spec).unwrap();
        let b = generate_cohort(&spec).unwrap();
        assert_eq!(csv(&a), csv(&b));
        assert_eq!(a.n_rows(), 70);
        assert_eq!(a.target().iter().filter(|&&v| v == 1).count(), 30);
        let other = CohortSpec { seed: 6, ..spec };
        assert_ne!(csv(&generate_cohort(&other).unwrap()), csv(&a));
    }

    #[test]
    fn floors_and_missingness() {
        let ds = generate_cohort(&small_spec()).unwrap();
        let j = ds.column_index("a").unwrap();
        assert!(ds.observed(j).iter().all(|&v| v >= 0.0));
        assert!(ds.missing_count(ds.column_index("b").unwrap()) > 0);
    }

    #[test]
    fn invalid_specs() {
        let mut s = small_spec();
        s.features[1].proportions = Some([vec![0.2, 0.3, 0.4], vec![0.6, 0.2, 0.2]]);
        assert!(matches!(s.validate(), Err(Error::Spec(_))));
        let mut s = small_spec();
        s.signal.insert("nope".into(), 1.0);
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.n1 = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn clipped_moments_by_quadrature() {
        // midpoint rule over the unclipped part plus the mass at the floor
        let (mu, sigma, f) = (1.0, 2.0, 0.5);
        let (m, s) = clipped_normal_moments(mu, sigma, Some(f));
        let std = Normal::new(mu, sigma).unwrap();
        let (mut e1, mut e2) = (f * std.cdf(f), f * f * std.cdf(f));
        let h = 1e-4;
        let mut x = f + h / 2.0;
        while x < mu + 12.0 * sigma {
            e1 += x * std.pdf(x) * h;
            e2 += x * x * std.pdf(x) * h;
            x += h;
        }
        assert!((m - e1).abs() < 1e-6);
        assert!((s - (e2 - e1 * e1).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn shifted_spec_is_flagged() {
        let spec = CohortSpec {
            n0: 3000,
            n1: 3000,
            ..small_spec()
        };
        let ds = generate_cohort(&spec).unwrap();
        assert!(validate_marginals(&ds, &spec).unwrap().iter().all(|c| !c.flagged));
        let mut shifted = spec.clone();
        shifted.features[0].loc = Some([1.2, 2.0]);
        assert!(validate_marginals(&ds, &shifted).unwrap().iter().any(|c| c.flagged));
    }

    #[test]
    fn categorical_signal_raises_first_category() {
        let spec = small_spec();
        let mut with = spec.clone();
        with.signal.insert("b".into(), 1.0);
        match with.marginal(&with.features[1]) {
            Marginal::Multinomial { p } => {
                assert!((p[1][0] - sigmoid(logit(0.6) + 1.0)).abs() < 1e-15);
                assert!((p[1].iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            Marginal::Normal { .. } => unreachable!(),
        }
    }
}

//! Two-group comparisons for the stratified baseline table.

use std::io::Write;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::cohort::dataset::Dataset;
use crate::cohort::preprocess::sample_sd;
use crate::cohort::schema::ColumnKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Student's t with pooled variance.
    TTest,
    WelchTTest,
    /// Pearson chi-square without continuity correction.
    ChiSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn two_sided_t(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Two-sample t-test of `a` against `b`; pooled variance unless `welch`.
pub fn t_test(a: &[f64], b: &[f64], welch: bool) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "t-test needs at least two observations per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let diff = mean(a) - mean(b);
    let (v1, v2) = (sample_sd(a).powi(2), sample_sd(b).powi(2));
    let (se, df, kind) = if welch {
        let (q1, q2) = (v1 / n1, v2 / n2);
        let df = (q1 + q2).powi(2) / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0));
        ((q1 + q2).sqrt(), df, TestKind::WelchTTest)
    } else {
        let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0);
        ((pooled * (1.0 / n1 + 1.0 / n2)).sqrt(), n1 + n2 - 2.0, TestKind::TTest)
    };
    let t = if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / se
    };
    let df = if df.is_finite() && df > 0.0 { df } else { n1 + n2 - 2.0 };
    Ok(TestResult {
        kind,
        statistic: t,
        df,
        p_value: two_sided_t(t, df),
    })
}

/// Pearson chi-square test of independence on an r x c count table.
/// Rows or columns with a zero margin are ignored.
pub fn chi_square_test(table: &[Vec<f64>]) -> Result<TestResult> {
    let rows: Vec<&Vec<f64>> = table.iter().filter(|r| r.iter().sum::<f64>() > 0.0).collect();
    let n_cols = table.first().map_or(0, Vec::len);
    let col_totals: Vec<f64> = (0..n_cols).map(|c| rows.iter().map(|r| r[c]).sum()).collect();
    let live_cols: Vec<usize> = (0..n_cols).filter(|&c| col_totals[c] > 0.0).collect();
    let total: f64 = col_totals.iter().sum();
    if total == 0.0 {
        return Err(Error::InsufficientData("empty contingency table".into()));
    }
    let df = (rows.len().saturating_sub(1) * live_cols.len().saturating_sub(1)) as f64;
    if df == 0.0 {
        return Ok(TestResult {
            kind: TestKind::ChiSquare,
            statistic: 0.0,
            df: 0.0,
            p_value: 1.0,
        });
    }
    let mut stat = 0.0;
    for r in &rows {
        let row_total: f64 = r.iter().sum();
        for &c in &live_cols {
            let expected = row_total * col_totals[c] / total;
            stat += (r[c] - expected).powi(2) / expected;
        }
    }
    let dist = ChiSquared::new(df).expect("df > 0");
    Ok(TestResult {
        kind: TestKind::ChiSquare,
        statistic: stat,
        df,
        p_value: dist.sf(stat).clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GroupSummary {
    Continuous { n: usize, mean: f64, sd: f64 },
    Categorical { counts: Vec<usize>, percents: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub feature: String,
    pub categories: Vec<String>,
    pub group0: GroupSummary,
    pub group1: GroupSummary,
    pub test: TestResult,
}

/// Baseline characteristics stratified by the binary target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub n_group0: usize,
    pub n_group1: usize,
    pub rows: Vec<SummaryRow>,
}

/// Builds the baseline table: t-tests for continuous features, chi-square
/// for categorical and binary ones. Masked cells are skipped per feature.
pub fn baseline_table(ds: &Dataset, welch: bool) -> Result<CohortSummary> {
    let y = ds.target();
    let n1 = y.iter().filter(|&&v| v == 1).count();
    let n0 = y.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::InsufficientData("both outcome groups must be nonempty".into()));
    }
    let mut rows = Vec::new();
    for j in ds.feature_indices() {
        let col = ds.column(j);
        let mut groups: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for (i, &label) in y.iter().enumerate() {
            if let Some(v) = ds.value(i, j) {
                groups[label as usize].push(v);
            }
        }
        let row = match col.kind {
            ColumnKind::Continuous => {
                let test = t_test(&groups[0], &groups[1], welch)?;
                let summary = |g: &[f64]| GroupSummary::Continuous {
                    n: g.len(),
                    mean: mean(g),
                    sd: sample_sd(g),
                };
                SummaryRow {
                    feature: col.name.clone(),
                    categories: Vec::new(),
                    group0: summary(&groups[0]),
                    group1: summary(&groups[1]),
                    test,
                }
            }
            _ => {
                let categories = if col.kind == ColumnKind::Categorical {
                    col.categories.clone()
                } else {
                    vec!["0".to_string(), "1".to_string()]
                };
                let k = categories.len();
                let count = |g: &[f64]| {
                    let mut c = vec![0usize; k];
                    for &v in g {
                        c[v as usize] += 1;
                    }
                    c
                };
                let c0 = count(&groups[0]);
                let c1 = count(&groups[1]);
                let table: Vec<Vec<f64>> = (0..k).map(|i| vec![c0[i] as f64, c1[i] as f64]).collect();
                let test = chi_square_test(&table)?;
                let summary = |c: Vec<usize>| {
                    let n: usize = c.iter().sum();
                    let percents = c
                        .iter()
                        .map(|&x| if n == 0 { 0.0 } else { 100.0 * x as f64 / n as f64 })
                        .collect();
                    GroupSummary::Categorical { counts: c, percents }
                };
                SummaryRow {
                    feature: col.name.clone(),
                    categories,
                    group0: summary(c0),
                    group1: summary(c1),
                    test,
                }
            }
        };
        rows.push(row);
    }
    Ok(CohortSummary {
        n_group0: n0,
        n_group1: n1,
        rows,
    })
}

impl CohortSummary {
    /// One line per continuous feature and per category level.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "feature",
            "level",
            "group0",
            "group1",
            "test",
            "statistic",
            "df",
            "p_value",
        ])?;
        for row in &self.rows {
            let test = match row.test.kind {
                TestKind::TTest => "t_test",
                TestKind::WelchTTest => "welch_t_test",
                TestKind::ChiSquare => "chi_square",
            };
            let stat = format!("{}", row.test.statistic);
            let df = format!("{}", row.test.df);
            let p = format!("{}", row.test.p_value);
            match (&row.group0, &row.group1) {
                (
                    GroupSummary::Continuous { mean: m0, sd: s0, .. },
                    GroupSummary::Continuous { mean: m1, sd: s1, .. },
                ) => {
                    w.write_record([
                        row.feature.as_str(),
                        "",
                        &format!("{m0:.2} ± {s0:.2}"),
                        &format!("{m1:.2} ± {s1:.2}"),
                        test,
                        &stat,
                        &df,
                        &p,
                    ])?;
                }
                (
                    GroupSummary::Categorical {
                        counts: c0,
                        percents: p0,
                    },
                    GroupSummary::Categorical {
                        counts: c1,
                        percents: p1,
                    },
                ) => {
                    for (k, level) in row.categories.iter().enumerate() {
                        let first = k == 0;
                        w.write_record([
                            row.feature.as_str(),
                            level.as_str(),
                            &format!("{} ({:.2})", c0[k], p0[k]),
                            &format!("{} ({:.2})", c1[k], p1[k]),
                            if first { test } else { "" },
                            if first { &stat } else { "" },
                            if first { &df } else { "" },
                            if first { &p } else { "" },
                        ])?;
                    }
                }
                _ => unreachable!("both groups share the feature kind"),
            }
        }
        w.flush()?;
        Ok(())
    }
}

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

use super::roc::class_counts;

/// Paired DeLong comparison of two AUCs on the same rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub covariance: f64,
    /// Variance of `auc_a - auc_b`.
    pub var_diff: f64,
    pub z: f64,
    pub p_value: f64,
    /// Set when the variance is zero but the AUCs differ; `p_value` is then
    /// reported as 0.
    pub zero_variance: bool,
}

fn psi(pos: f64, neg: f64) -> f64 {
    if pos > neg {
        1.0
    } else if pos == neg {
        0.5
    } else {
        0.0
    }
}

/// Per-positive and per-negative placement values; their means are the AUC.
pub(crate) fn placements(y: &[u8], scores: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pos: Vec<f64> = y.iter().zip(scores).filter(|(&l, _)| l == 1).map(|(_, &s)| s).collect();
    let neg: Vec<f64> = y.iter().zip(scores).filter(|(&l, _)| l == 0).map(|(_, &s)| s).collect();
    let v10 = pos
        .iter()
        .map(|&p| neg.iter().map(|&n| psi(p, n)).sum::<f64>() / neg.len() as f64)
        .collect();
    let v01 = neg
        .iter()
        .map(|&n| pos.iter().map(|&p| psi(p, n)).sum::<f64>() / pos.len() as f64)
        .collect();
    (v10, v01)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn cov(a: &[f64], b: &[f64]) -> f64 {
    if a.len() < 2 {
        return 0.0;
    }
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64
}

/// DeLong variance of a single AUC.
pub fn delong_variance(y: &[u8], scores: &[f64]) -> Result<f64> {
    let (m, n) = class_counts(y, scores)?;
    let (v10, v01) = placements(y, scores);
    Ok(cov(&v10, &v10) / m as f64 + cov(&v01, &v01) / n as f64)
}

/// Two-sided DeLong test of `AUC(a) = AUC(b)`.
pub fn delong_test(y: &[u8], scores_a: &[f64], scores_b: &[f64]) -> Result<DelongResult> {
    let (m, n) = class_counts(y, scores_a)?;
    class_counts(y, scores_b)?;
    if scores_a.len() != scores_b.len() {
        return Err(Error::Shape("score vectors differ in length".into()));
    }
    let (a10, a01) = placements(y, scores_a);
    let (b10, b01) = placements(y, scores_b);
    let (m, n) = (m as f64, n as f64);
    let auc_a = mean(&a10);
    let auc_b = mean(&b10);
    let var_a = cov(&a10, &a10) / m + cov(&a01, &a01) / n;
    let var_b = cov(&b10, &b10) / m + cov(&b01, &b01) / n;
    let covariance = cov(&a10, &b10) / m + cov(&a01, &b01) / n;
    let var_diff = (var_a + var_b - 2.0 * covariance).max(0.0);
    let diff = auc_a - auc_b;

    let (z, p_value, zero_variance) = if scores_a == scores_b || diff == 0.0 {
        (0.0, 1.0, false)
    } else if var_diff == 0.0 {
        (diff.signum() * f64::INFINITY, 0.0, true)
    } else {
        let z = diff / var_diff.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (z, (2.0 * normal.sf(z.abs())).min(1.0), false)
    };
    Ok(DelongResult {
        auc_a,
        auc_b,
        var_a,
        var_b,
        covariance,
        var_diff,
        z,
        p_value,
        zero_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::roc::auc;

    #[test]
    fn identical_scores() {
        let y = [0, 1, 0, 1, 1, 0];
        let s = [0.1, 0.7, 0.4, 0.3, 0.9, 0.2];
        let r = delong_test(&y, &s, &s).unwrap();
        assert_eq!(r.z, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.auc_a, auc(&y, &s).unwrap());
    }

    #[test]
    fn swap_negates_z() {
        let y = [0, 1, 0, 1, 1, 0, 1, 0];
        let a = [0.1, 0.7, 0.4, 0.3, 0.9, 0.2, 0.6, 0.5];
        let b = [0.3, 0.6, 0.2, 0.1, 0.4, 0.5, 0.8, 0.7];
        let ab = delong_test(&y, &a, &b).unwrap();
        let ba = delong_test(&y, &b, &a).unwrap();
        assert!((ab.z + ba.z).abs() < 1e-15);
        assert!((ab.p_value - ba.p_value).abs() < 1e-15);
        assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
    }

    #[test]
    fn zero_variance_flag() {
        // both classifiers are constant within each class, so every
        // placement value equals its mean
        let y = [0, 0, 1, 1];
        let a = [0.1, 0.1, 0.9, 0.9];
        let b = [0.9, 0.9, 0.1, 0.1];
        let r = delong_test(&y, &a, &b).unwrap();
        assert!(r.zero_variance);
        assert_eq!(r.p_value, 0.0);
    }
}

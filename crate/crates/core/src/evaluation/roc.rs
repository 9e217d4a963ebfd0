use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ROC curve from (0, 0) to (1, 1); tied scores form a single diagonal step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    /// Score at which each point is reached; the first entry is +inf.
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    /// `fpr, tpr, threshold` rows.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fpr", "tpr", "threshold"])?;
        for i in 0..self.fpr.len() {
            w.write_record([
                self.fpr[i].to_string(),
                self.tpr[i].to_string(),
                self.thresholds[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn class_counts(y: &[u8], scores: &[f64]) -> Result<(usize, usize)> {
    if y.len() != scores.len() {
        return Err(Error::Shape(format!("{} labels but {} scores", y.len(), scores.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Domain("scores contain NaN".into()));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Domain("labels must be 0 or 1".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok((pos, neg))
}

/// ROC points at every distinct score, descending, with trapezoidal AUC.
pub fn roc_points(y: &[u8], scores: &[f64]) -> Result<RocCurve> {
    let (pos, neg) = class_counts(y, scores)?;
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut fpr = vec![0.0];
    let mut tpr = vec![0.0];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area in units of one (positive, negative) pair, kept exact
    let mut area2 = 0u64;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if y[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) * (tp + tp0);
        fpr.push(fp as f64 / neg as f64);
        tpr.push(tp as f64 / pos as f64);
        thresholds.push(s);
    }
    let auc = area2 as f64 / (2.0 * pos as f64 * neg as f64);
    Ok(RocCurve {
        fpr,
        tpr,
        thresholds,
        auc,
    })
}

/// Trapezoidal AUC.
pub fn auc(y: &[u8], scores: &[f64]) -> Result<f64> {
    Ok(roc_points(y, scores)?.auc)
}

/// `(concordant + tied / 2) / (n_pos · n_neg)` over all positive-negative
/// pairs; O(n²).
pub fn auc_mann_whitney(y: &[u8], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = class_counts(y, scores)?;
    let mut twice = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        if y[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if y[j] == 0 {
                twice += if si > sj {
                    2
                } else if si == sj {
                    1
                } else {
                    0
                };
            }
        }
    }
    Ok(twice as f64 / (2.0 * pos as f64 * neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        assert_eq!(auc(&[0, 1], &[0.1, 0.9]).unwrap(), 1.0);
        assert_eq!(auc(&[0, 1], &[0.5, 0.5]).unwrap(), 0.5);
        let y = [0, 0, 1, 1];
        let s = [0.1, 0.4, 0.35, 0.8];
        assert_eq!(auc(&y, &s).unwrap(), 0.75);
        assert_eq!(auc_mann_whitney(&y, &s).unwrap(), 0.75);
        let rev: Vec<f64> = s.iter().map(|v| -v).collect();
        assert_eq!(auc_mann_whitney(&y, &rev).unwrap(), 0.25);
    }

    #[test]
    fn curve_shape() {
        let r = roc_points(&[0, 1, 1, 0, 1], &[0.2, 0.2, 0.9, 0.5, 0.1]).unwrap();
        assert_eq!((r.fpr[0], r.tpr[0]), (0.0, 0.0));
        assert_eq!((*r.fpr.last().unwrap(), *r.tpr.last().unwrap()), (1.0, 1.0));
        assert!(r.fpr.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.tpr.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(r.thresholds.len(), 5);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(roc_points(&[1, 1], &[0.2, 0.3]), Err(Error::DegenerateLabels)));
    }
}

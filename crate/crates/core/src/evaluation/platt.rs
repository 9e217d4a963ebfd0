use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{logit, sigmoid};

/// `p' = sigmoid(slope · logit(p) + intercept)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattScaling {
    pub slope: f64,
    pub intercept: f64,
}

/// Probabilities are clamped to `[EPS, 1 − EPS]` before taking logits so
/// that averaging models with pure leaves stay finite.
const EPS: f64 = 1e-12;

fn clamped_logit(p: f64) -> f64 {
    logit(p.clamp(EPS, 1.0 - EPS))
}

impl PlattScaling {
    pub fn apply(&self, p: f64) -> f64 {
        sigmoid(self.slope * clamped_logit(p) + self.intercept)
    }

    pub fn apply_all(&self, probs: &[f64]) -> Vec<f64> {
        probs.iter().map(|&p| self.apply(p)).collect()
    }
}

fn log_lik(s: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
    s.iter()
        .zip(y)
        .map(|(&si, &yi)| {
            let m = a * si + b;
            let sp = if m > 0.0 {
                m + (-m).exp().ln_1p()
            } else {
                m.exp().ln_1p()
            };
            yi * m - sp
        })
        .sum()
}

/// Fits a one-dimensional logistic regression of `y` on `logit(probs)` by
/// damped Newton iterations. Constant inputs give an intercept-only fit
/// (slope 0) at the base rate.
pub fn fit_platt(y: &[u8], probs: &[f64]) -> Result<PlattScaling> {
    if y.len() != probs.len() || y.is_empty() {
        return Err(Error::Shape(
            "labels and probabilities must be nonempty and equal length".into(),
        ));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain("probabilities must lie in [0, 1]".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateLabels);
    }
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let s: Vec<f64> = probs.iter().map(|&p| clamped_logit(p)).collect();
    let base = logit(pos as f64 / y.len() as f64);
    if s.iter().all(|&v| v == s[0]) {
        return Ok(PlattScaling {
            slope: 0.0,
            intercept: base,
        });
    }

    let (mut a, mut b) = (1.0, 0.0);
    let mut ll = log_lik(&s, &yf, a, b);
    if !ll.is_finite() {
        a = 0.0;
        b = base;
        ll = log_lik(&s, &yf, a, b);
    }
    for _ in 0..200 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&si, &yi) in s.iter().zip(&yf) {
            let p = sigmoid(a * si + b);
            let r = yi - p;
            let w = p * (1.0 - p);
            ga += r * si;
            gb += r;
            haa += w * si * si;
            hab += w * si;
            hbb += w;
        }
        let det = haa * hbb - hab * hab;
        if !(det > 0.0) {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-10 {
            let (na, nb) = (a + t * da, b + t * db);
            let nll = log_lik(&s, &yf, na, nb);
            if nll >= ll {
                a = na;
                b = nb;
                ll = nll;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || (t * da).abs().max((t * db).abs()) < 1e-12 {
            break;
        }
    }
    Ok(PlattScaling { slope: a, intercept: b })
}

/// Fits Platt scaling and applies it to the same probabilities.
pub fn platt_recalibrate(y: &[u8], probs: &[f64]) -> Result<(Vec<f64>, PlattScaling)> {
    let fit = fit_platt(y, probs)?;
    Ok((fit.apply_all(probs), fit))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_probs_map_to_base_rate() {
        let y = [1, 1, 1, 0, 0];
        let (out, fit) = platt_recalibrate(&y, &[0.3; 5]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!(out.iter().all(|&p| (p - 0.6).abs() < 1e-12));
    }

    #[test]
    fn score_equations_hold_at_optimum() {
        let y = [0, 1, 0, 1, 1, 0, 1, 0, 0, 1];
        let p = [0.2, 0.7, 0.4, 0.35, 0.9, 0.3, 0.6, 0.55, 0.1, 0.8];
        let (out, fit) = platt_recalibrate(&y, &p).unwrap();
        assert!(fit.slope > 0.0);
        // gradient of the log-likelihood vanishes: Σ(y − p') = 0 and Σ(y − p')·s = 0
        let r: Vec<f64> = y.iter().zip(&out).map(|(&yi, &q)| f64::from(yi) - q).collect();
        assert!(r.iter().sum::<f64>().abs() < 1e-9);
        let rs: f64 = r.iter().zip(&p).map(|(ri, &pi)| ri * logit(pi)).sum();
        assert!(rs.abs() < 1e-9);
    }

    #[test]
    fn degenerate_labels() {
        assert!(matches!(fit_platt(&[1, 1], &[0.2, 0.4]), Err(Error::DegenerateLabels)));
    }
}

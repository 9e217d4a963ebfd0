use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Net benefit of a model and the two reference strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetBenefitCurve {
    pub thresholds: Vec<f64>,
    pub model: Vec<f64>,
    pub treat_all: Vec<f64>,
    pub treat_none: Vec<f64>,
    pub prevalence: f64,
}

impl NetBenefitCurve {
    /// Thresholds where the model beats both treat-all and treat-none.
    pub fn useful_thresholds(&self) -> Vec<f64> {
        (0..self.thresholds.len())
            .filter(|&i| self.model[i] > self.treat_all[i].max(0.0))
            .map(|i| self.thresholds[i])
            .collect()
    }
}

/// `i / 100` for `i = 1..=99`.
pub fn default_thresholds() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// `TP/n − FP/n · p_t/(1 − p_t)`, calling a row positive when
/// `prob >= p_t`.
pub fn net_benefit(y: &[u8], probs: &[f64], threshold: f64) -> Result<f64> {
    check_threshold(threshold)?;
    if y.len() != probs.len() || y.is_empty() {
        return Err(Error::Shape(
            "labels and probabilities must be nonempty and equal length".into(),
        ));
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    for (&yi, &p) in y.iter().zip(probs) {
        if p >= threshold {
            if yi == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let n = y.len() as f64;
    Ok(tp as f64 / n - fp as f64 / n * (threshold / (1.0 - threshold)))
}

/// `prev − (1 − prev) · p_t/(1 − p_t)`.
pub fn treat_all_net_benefit(prevalence: f64, threshold: f64) -> f64 {
    prevalence - (1.0 - prevalence) * threshold / (1.0 - threshold)
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("threshold {t} is outside (0, 1)")))
    }
}

pub fn net_benefit_curve(y: &[u8], probs: &[f64], thresholds: &[f64]) -> Result<NetBenefitCurve> {
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain("probabilities must lie in [0, 1]".into()));
    }
    thresholds.iter().try_for_each(|&t| check_threshold(t))?;
    let prevalence = y.iter().filter(|&&v| v == 1).count() as f64 / y.len().max(1) as f64;
    let model = thresholds
        .iter()
        .map(|&t| net_benefit(y, probs, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetBenefitCurve {
        thresholds: thresholds.to_vec(),
        model,
        treat_all: thresholds
            .iter()
            .map(|&t| treat_all_net_benefit(prevalence, t))
            .collect(),
        treat_none: vec![0.0; thresholds.len()],
        prevalence,
    })
}

//! Discrimination, clinical utility and calibration statistics.

mod calibration;
mod dca;
mod delong;
mod platt;
mod roc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use calibration::{calibration_curve, Binning, CalibrationBin, CalibrationOptions, CalibrationReport};
pub use dca::{default_thresholds, net_benefit, net_benefit_curve, treat_all_net_benefit, NetBenefitCurve};
pub use delong::{delong_test, delong_variance, DelongResult};
pub use platt::{fit_platt, platt_recalibrate, PlattScaling};
pub use roc::{auc, auc_mann_whitney, roc_points, RocCurve};

/// Fraction of rows where `(prob >= cutoff) == (y == 1)`.
pub fn accuracy_at_cutoff(y: &[u8], probs: &[f64], cutoff: f64) -> f64 {
    let hits = y
        .iter()
        .zip(probs)
        .filter(|(&yi, &p)| (p >= cutoff) == (yi == 1))
        .count();
    hits as f64 / y.len() as f64
}

/// Held-out evaluation of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub roc: RocCurve,
    pub accuracy: f64,
    pub net_benefit: NetBenefitCurve,
    pub calibration: CalibrationReport,
}

pub fn evaluate(y: &[u8], probs: &[f64], calibration: &CalibrationOptions) -> Result<EvalReport> {
    if y.len() != probs.len() {
        return Err(Error::Shape(format!(
            "{} labels but {} probabilities",
            y.len(),
            probs.len()
        )));
    }
    Ok(EvalReport {
        roc: roc_points(y, probs)?,
        accuracy: accuracy_at_cutoff(y, probs, 0.5),
        net_benefit: net_benefit_curve(y, probs, &default_thresholds())?,
        calibration: calibration_curve(y, probs, calibration)?,
    })
}

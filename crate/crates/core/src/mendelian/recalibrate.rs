use serde::{Deserialize, Serialize};

use super::interval_risk;
use crate::error::{Error, Result};
use crate::genetics::{CarrierClass, PenetranceModel};
use crate::pedigree::{classify_relative, Pedigree, Sex, MAX_AGE};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecalibrationFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares of `reference` on `predictions`.
pub fn recalibrate_fit(predictions: &[f64], reference: &[f64]) -> Result<RecalibrationFit> {
    if predictions.len() != reference.len() {
        return Err(Error::Shape {
            expected: predictions.len(),
            got: reference.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Degenerate("recalibration needs predictions".into()));
    }
    let n = predictions.len() as f64;
    let mx = predictions.iter().sum::<f64>() / n;
    let my = reference.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in predictions.iter().zip(reference) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let distinct = predictions.iter().any(|&x| x != predictions[0]);
    if !distinct || sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::Degenerate(
            "recalibration needs at least two distinct predictions".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok(RecalibrationFit {
        slope,
        intercept: my - slope * mx,
    })
}

pub fn recalibrate_apply(fit: &RecalibrationFit, predictions: &[f64]) -> Vec<f64> {
    predictions
        .iter()
        .map(|&p| (fit.intercept + fit.slope * p).clamp(0.0, 1.0))
        .collect()
}

/// Number of first-degree relatives of the counselee with breast cancer.
pub fn affected_first_degree(p: &Pedigree) -> usize {
    (1..p.len())
        .filter(|&r| classify_relative(p, r).map(|t| t.degree() == Some(1)).unwrap_or(false))
        .filter(|&r| p.members[r].breast.affected)
        .count()
}

/// Age-specific baseline risk scaled by a family-history relative risk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRiskTable {
    pub horizon: u32,
    /// Baseline t-year risk indexed by age 0..=94.
    pub base_risk: Vec<f64>,
    /// Relative risk for 0, 1, 2 and 3-or-more affected first-degree relatives.
    pub relative_risk: [f64; 4],
}

impl ReferenceRiskTable {
    pub const DEFAULT_RR: [f64; 4] = [1.0, 1.8, 2.9, 3.9];

    /// Baseline from the noncarrier female breast curve.
    pub fn from_model(model: &PenetranceModel, horizon: u32) -> Self {
        let base_risk = (0..=MAX_AGE)
            .map(|a| {
                if a >= MAX_AGE {
                    0.0
                } else {
                    interval_risk(model, CarrierClass::Noncarrier, Sex::Female, a, horizon)
                }
            })
            .collect();
        ReferenceRiskTable {
            horizon,
            base_risk,
            relative_risk: Self::DEFAULT_RR,
        }
    }

    pub fn risk(&self, age: u32, affected_fdr: usize) -> f64 {
        let base = self.base_risk[(age as usize).min(self.base_risk.len() - 1)];
        (base * self.relative_risk[affected_fdr.min(3)]).min(1.0)
    }

    pub fn risk_for(&self, p: &Pedigree) -> Result<f64> {
        let age = p
            .counselee()
            .current_age
            .ok_or_else(|| Error::Prediction(format!("counselee of family {} has no baseline age", p.family_id)))?;
        Ok(self.risk(age, affected_first_degree(p)))
    }
}

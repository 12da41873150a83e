//! Mendelian carrier probabilities and future cancer risk.

mod brute;
mod peeling;
mod recalibrate;
mod risk;

use serde::{Deserialize, Serialize};

use crate::genetics::CarrierClass;

pub use brute::{brute_force_joint, brute_force_posterior, BRUTE_FORCE_MAX_MEMBERS};
pub use peeling::{carrier_posterior_peeling, joint_posterior_peeling};
pub use recalibrate::{
    affected_first_degree, recalibrate_apply, recalibrate_fit, RecalibrationFit, ReferenceRiskTable,
};
pub use risk::{future_risk, interval_risk, predict_family, FamilyPrediction, RiskPrediction};

/// Counselee carrier-class posterior, indexed by [`CarrierClass::index`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarrierPosterior(pub [f64; 4]);

impl CarrierPosterior {
    pub fn get(&self, c: CarrierClass) -> f64 {
        self.0[c.index()]
    }

    pub fn max_abs_diff(&self, other: &CarrierPosterior) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn normalize<const N: usize>(v: &mut [f64; N]) -> f64 {
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
    s
}

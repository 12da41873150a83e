use serde::{Deserialize, Serialize};

use super::{carrier_posterior_peeling, CarrierPosterior};
use crate::error::{Error, Result};
use crate::genetics::{Cancer, CarrierClass, PenetranceModel};
use crate::pedigree::{Pedigree, Sex, MAX_AGE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskPrediction {
    pub family_id: String,
    pub horizon: u32,
    pub risk: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyPrediction {
    pub posterior: CarrierPosterior,
    pub risk: RiskPrediction,
}

/// P(breast onset in (a0, a0 + t] | onset > a0, class); the horizon is
/// clipped at the oldest tabulated age.
pub fn interval_risk(model: &PenetranceModel, class: CarrierClass, sex: Sex, a0: u32, t: u32) -> f64 {
    let end = (a0 + t).min(MAX_AGE);
    let f0 = model.onset_cdf(class, sex, Cancer::Breast, a0);
    let f1 = model.onset_cdf(class, sex, Cancer::Breast, end);
    let surv = 1.0 - f0;
    if surv <= 0.0 {
        return 0.0;
    }
    ((f1 - f0) / surv).clamp(0.0, 1.0)
}

fn risk_from_posterior(
    p: &Pedigree,
    posterior: &CarrierPosterior,
    t: u32,
    model: &PenetranceModel,
) -> Result<RiskPrediction> {
    let c = p.counselee();
    if c.breast.affected {
        return Err(Error::Prediction(format!(
            "counselee of family {} already has breast cancer",
            p.family_id
        )));
    }
    let a0 = c
        .current_age
        .ok_or_else(|| Error::Prediction(format!("counselee of family {} has no baseline age", p.family_id)))?;
    if a0 >= MAX_AGE {
        return Err(Error::Prediction(format!(
            "counselee of family {} is {a0}, at or beyond the last tabulated age",
            p.family_id
        )));
    }
    let risk: f64 = CarrierClass::ALL
        .iter()
        .map(|&k| posterior.get(k) * interval_risk(model, k, c.sex, a0, t))
        .sum();
    Ok(RiskPrediction {
        family_id: p.family_id.clone(),
        horizon: t,
        risk: risk.clamp(0.0, 1.0),
    })
}

/// t-year breast cancer risk for the counselee: the carrier posterior mixed
/// over class-specific conditional onset probabilities.
pub fn future_risk(p: &Pedigree, t: u32, model: &PenetranceModel) -> Result<RiskPrediction> {
    predict_family(p, t, model).map(|x| x.risk)
}

pub fn predict_family(p: &Pedigree, t: u32, model: &PenetranceModel) -> Result<FamilyPrediction> {
    let c = p.counselee();
    if c.breast.affected {
        return Err(Error::Prediction(format!(
            "counselee of family {} already has breast cancer",
            p.family_id
        )));
    }
    let posterior = carrier_posterior_peeling(p, model)?;
    let risk = risk_from_posterior(p, &posterior, t, model)?;
    Ok(FamilyPrediction { posterior, risk })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genetics::{build_default_penetrance, LocusModel, PenetranceConfig};
    use crate::pedigree::{Diagnosis, Member};

    fn counselee(age: u32) -> Pedigree {
        Pedigree::new("c", vec![Member::new(0, Sex::Female, age)])
    }

    #[test]
    fn zero_horizon_zero_risk() {
        let model = PenetranceModel::default_synthetic();
        assert_eq!(future_risk(&counselee(40), 0, &model).unwrap().risk, 0.0);
    }

    #[test]
    fn degenerate_posterior_gives_noncarrier_interval() {
        let mut cfg = PenetranceConfig::default();
        cfg.loci = [LocusModel::new("locus1", 0.0), LocusModel::new("locus2", 0.0)];
        let model = build_default_penetrance(&cfg).unwrap();
        let r = future_risk(&counselee(45), 10, &model).unwrap().risk;
        let expect = interval_risk(&model, CarrierClass::Noncarrier, Sex::Female, 45, 10);
        assert_eq!(r, expect);
        let f0 = model.onset_cdf(CarrierClass::Noncarrier, Sex::Female, Cancer::Breast, 45);
        let f1 = model.onset_cdf(CarrierClass::Noncarrier, Sex::Female, Cancer::Breast, 55);
        assert!((expect - (f1 - f0) / (1.0 - f0)).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let model = PenetranceModel::default_synthetic();
        let mut p = counselee(50);
        p.members[0].breast = Diagnosis::at(44);
        assert!(future_risk(&p, 10, &model).is_err());
        assert!(future_risk(&counselee(94), 10, &model).is_err());
    }

    #[test]
    fn risk_monotone_in_horizon() {
        let model = PenetranceModel::default_synthetic();
        let mut prev = 0.0;
        for t in 0..60 {
            let r = future_risk(&counselee(40), t, &model).unwrap().risk;
            assert!(r >= prev);
            prev = r;
        }
    }
}

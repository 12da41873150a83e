use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genetics::{Cancer, NormalParams};
use crate::pedigree::{classify_relative, Diagnosis, Member, Pedigree, Sex, MAX_AGE};
use crate::seed;

/// Misreporting rates for one cancer site, indexed by degree (first, second).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CancerMisreport {
    pub fnr: [f64; 2],
    pub fpr: [f64; 2],
    /// Fraction of reported onset ages that carry an error.
    pub onset_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MisreportConfig {
    pub breast: CancerMisreport,
    pub ovarian: CancerMisreport,
    /// Magnitude of onset and current-age errors; the sign is random.
    pub age_error: NormalParams,
    /// Fraction of non-counselee current ages that carry an error.
    pub current_age_fraction: f64,
}

impl Default for MisreportConfig {
    fn default() -> Self {
        MisreportConfig {
            breast: CancerMisreport {
                fnr: [0.05, 0.18],
                fpr: [0.03, 0.03],
                onset_fraction: 0.03,
            },
            ovarian: CancerMisreport {
                fnr: [0.17, 0.56],
                fpr: [0.01, 0.02],
                onset_fraction: 0.04,
            },
            age_error: NormalParams { mean: 4.0, sd: 3.0 },
            current_age_fraction: 0.03,
        }
    }
}

impl MisreportConfig {
    /// No misreporting at all.
    pub fn none() -> Self {
        let zero = CancerMisreport {
            fnr: [0.0; 2],
            fpr: [0.0; 2],
            onset_fraction: 0.0,
        };
        MisreportConfig {
            breast: zero,
            ovarian: zero,
            age_error: NormalParams { mean: 4.0, sd: 3.0 },
            current_age_fraction: 0.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        let rates = [self.breast, self.ovarian]
            .into_iter()
            .flat_map(|c| [c.fnr[0], c.fnr[1], c.fpr[0], c.fpr[1], c.onset_fraction])
            .chain([self.current_age_fraction]);
        for r in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("misreporting rate {r} outside [0, 1]")));
            }
        }
        if !(self.age_error.sd >= 0.0) || !self.age_error.mean.is_finite() {
            return Err(Error::Config("invalid age error distribution".into()));
        }
        Ok(())
    }

    fn site(&self, cancer: Cancer) -> &CancerMisreport {
        match cancer {
            Cancer::Breast => &self.breast,
            Cancer::Ovarian => &self.ovarian,
        }
    }
}

fn signed_error(rng: &mut ChaCha8Rng, p: NormalParams) -> i64 {
    let magnitude = if p.sd > 0.0 {
        Normal::new(p.mean, p.sd).expect("finite normal").sample(rng)
    } else {
        p.mean
    };
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    (sign * magnitude).round() as i64
}

fn diagnosis_mut(m: &mut Member, cancer: Cancer) -> &mut Diagnosis {
    match cancer {
        Cancer::Breast => &mut m.breast,
        Cancer::Ovarian => &mut m.ovarian,
    }
}

/// Applies degree-specific false negatives and positives and age errors to
/// every first- and second-degree relative. The counselee and relatives of
/// other types are left as they are; family structure never changes.
pub fn perturb_misreport(p: &Pedigree, config: &MisreportConfig, seed: u64) -> Pedigree {
    let mut rng = seed::rng(seed);
    let mut out = p.clone();
    for r in 1..out.len() {
        let degree = match classify_relative(p, r).ok().and_then(|t| t.degree()) {
            Some(d @ (1 | 2)) => d as usize - 1,
            _ => continue,
        };
        let m = &mut out.members[r];
        let age = m.current_age;
        for cancer in Cancer::ALL {
            if cancer == Cancer::Ovarian && m.sex == Sex::Male {
                continue;
            }
            let rates = *config.site(cancer);
            let d = diagnosis_mut(m, cancer);
            if d.affected {
                if rng.gen_bool(rates.fnr[degree]) {
                    *d = Diagnosis::UNAFFECTED;
                } else if let (Some(onset), Some(ca)) = (d.onset_age, age) {
                    if ca >= 1 && rng.gen_bool(rates.onset_fraction) {
                        let shifted = onset as i64 + signed_error(&mut rng, config.age_error);
                        d.onset_age = Some(shifted.clamp(1, ca as i64) as u32);
                    }
                }
            } else if let Some(ca) = age.filter(|&a| a >= 1) {
                if rng.gen_bool(rates.fpr[degree]) {
                    let lo = ca.min(18);
                    *d = Diagnosis::at(rng.gen_range(lo..=ca));
                }
            }
        }
        if let Some(ca) = m.current_age {
            if rng.gen_bool(config.current_age_fraction) {
                let floor = [m.breast, m.ovarian]
                    .iter()
                    .filter_map(|d| d.known_onset())
                    .max()
                    .unwrap_or(0)
                    .max(1);
                let shifted = ca as i64 + signed_error(&mut rng, config.age_error);
                m.current_age = Some(shifted.clamp(floor as i64, MAX_AGE as i64) as u32);
            }
        }
    }
    out
}

/// Misreports every family in a cohort with per-family derived seeds.
pub fn perturb_cohort(peds: &[Pedigree], config: &MisreportConfig, master_seed: u64) -> Vec<Pedigree> {
    peds.par_iter()
        .enumerate()
        .map(|(i, p)| perturb_misreport(p, config, seed::derive(master_seed, i as u64)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropMode {
    Any,
    UnaffectedOnly,
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("fraction {fraction} outside [0, 1]")));
    }
    Ok(())
}

/// Removes `round(fraction * eligible)` non-counselee members chosen uniformly;
/// children of removed members lose that parent link.
pub fn drop_relatives(p: &Pedigree, fraction: f64, mode: DropMode, seed: u64) -> Result<Pedigree> {
    check_fraction(fraction)?;
    let eligible: Vec<usize> = p
        .members
        .iter()
        .skip(1)
        .filter(|m| mode == DropMode::Any || !(m.breast.affected || m.ovarian.affected))
        .map(|m| m.id)
        .collect();
    let k = (fraction * eligible.len() as f64).round() as usize;
    let mut rng = seed::rng(seed);
    let mut remove = vec![false; p.len()];
    for i in sample(&mut rng, eligible.len(), k.min(eligible.len())) {
        remove[eligible[i]] = true;
    }
    Ok(p.retain_members(|m| !remove[m.id]))
}

/// Marks `round(fraction * affected diagnoses)` onset ages as missing.
pub fn blank_onset_ages(p: &Pedigree, fraction: f64, seed: u64) -> Result<Pedigree> {
    check_fraction(fraction)?;
    let sites: Vec<(usize, Cancer)> = p
        .members
        .iter()
        .flat_map(|m| Cancer::ALL.into_iter().map(move |c| (m.id, c)))
        .filter(|&(r, c)| c.of(&p.members[r]).known_onset().is_some())
        .collect();
    let k = (fraction * sites.len() as f64).round() as usize;
    let mut rng = seed::rng(seed);
    let mut out = p.clone();
    for i in sample(&mut rng, sites.len(), k.min(sites.len())) {
        let (r, c) = sites[i];
        diagnosis_mut(&mut out.members[r], c).onset_age = None;
    }
    Ok(out)
}

/// Fills missing onset ages: 50 for members older than 50, the current age
/// otherwise. Members whose current age is also unknown get 50.
pub fn impute_onset_ages(p: &Pedigree) -> Pedigree {
    let mut out = p.clone();
    for m in &mut out.members {
        let fill = match m.current_age {
            Some(a) if a <= 50 => a,
            _ => 50,
        };
        for cancer in Cancer::ALL {
            let d = diagnosis_mut(m, cancer);
            if d.affected && d.onset_age.is_none() {
                d.onset_age = Some(fill);
            }
        }
    }
    out
}

//! Seeded cohort simulation under the two-locus Mendelian model.
//!
//! Each family gets its own RNG seeded from `(master seed, family index)`, so
//! cohorts are identical no matter how many worker threads generate them.

mod perturb;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genetics::{founder_prior, Cancer, CarrierClass, Genotype, NormalParams, PenetranceModel};
use crate::pedigree::{Diagnosis, Member, Pedigree, RelativeType, Sex, MAX_AGE};
use crate::seed;

pub use perturb::{
    blank_onset_ages, drop_relatives, impute_onset_ages, perturb_cohort, perturb_misreport, CancerMisreport, DropMode,
    MisreportConfig,
};

/// Largest number of relatives of a single type.
pub const MAX_PER_TYPE: usize = 5;

/// Distribution of the number of relatives of one type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountDist {
    /// Poisson truncated to `0..=cap`.
    Poisson { mean: f64, cap: usize },
    /// Explicit probabilities for counts 0, 1, 2, ...
    Table(Vec<f64>),
}

impl CountDist {
    pub fn probs(&self) -> Result<Vec<f64>> {
        let p = match self {
            CountDist::Poisson { mean, cap } => {
                if !(*mean >= 0.0) || !mean.is_finite() {
                    return Err(Error::Config(format!("invalid Poisson mean {mean}")));
                }
                if *cap > MAX_PER_TYPE {
                    return Err(Error::Config(format!("count cap {cap} exceeds {MAX_PER_TYPE}")));
                }
                let mut w = Vec::with_capacity(cap + 1);
                let mut term = (-mean).exp();
                for k in 0..=*cap {
                    w.push(term);
                    term *= mean / (k + 1) as f64;
                }
                let z: f64 = w.iter().sum();
                w.into_iter().map(|x| x / z).collect()
            }
            CountDist::Table(p) => {
                if p.is_empty() || p.len() > MAX_PER_TYPE + 1 {
                    return Err(Error::Config(format!(
                        "count table must have 1..={} entries",
                        MAX_PER_TYPE + 1
                    )));
                }
                if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                    return Err(Error::Config("count probabilities must lie in [0, 1]".into()));
                }
                let s: f64 = p.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("count probabilities sum to {s}")));
                }
                p.clone()
            }
        };
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedNormal {
    pub mean: f64,
    pub sd: f64,
    pub min: u32,
    pub max: u32,
}

/// Family-structure distribution. Grandparents and parents are always present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructureDistribution {
    pub maternal_aunts: CountDist,
    pub maternal_uncles: CountDist,
    pub paternal_aunts: CountDist,
    pub paternal_uncles: CountDist,
    pub sisters: CountDist,
    pub brothers: CountDist,
    pub daughters: CountDist,
    pub sons: CountDist,
    pub baseline_age: BoundedNormal,
}

impl Default for StructureDistribution {
    fn default() -> Self {
        let p = |mean| CountDist::Poisson {
            mean,
            cap: MAX_PER_TYPE,
        };
        StructureDistribution {
            maternal_aunts: p(1.5),
            maternal_uncles: p(1.5),
            paternal_aunts: p(1.5),
            paternal_uncles: p(1.5),
            sisters: p(1.2),
            brothers: p(1.2),
            daughters: p(0.9),
            sons: p(0.9),
            baseline_age: BoundedNormal {
                mean: 47.0,
                sd: 14.0,
                min: 18,
                max: 84,
            },
        }
    }
}

impl StructureDistribution {
    /// Variable relative types in member-list order, with their count tables.
    fn tables(&self) -> Result<[(RelativeType, Vec<f64>); 8]> {
        Ok([
            (RelativeType::MaternalAunt, self.maternal_aunts.probs()?),
            (RelativeType::MaternalUncle, self.maternal_uncles.probs()?),
            (RelativeType::PaternalAunt, self.paternal_aunts.probs()?),
            (RelativeType::PaternalUncle, self.paternal_uncles.probs()?),
            (RelativeType::Sister, self.sisters.probs()?),
            (RelativeType::Brother, self.brothers.probs()?),
            (RelativeType::Daughter, self.daughters.probs()?),
            (RelativeType::Son, self.sons.probs()?),
        ])
    }

    pub fn check(&self) -> Result<()> {
        self.tables()?;
        let b = &self.baseline_age;
        if b.min > b.max || b.max >= MAX_AGE || !(b.sd >= 0.0) {
            return Err(Error::Config(format!(
                "baseline age range [{}, {}] must satisfy min <= max < {MAX_AGE}",
                b.min, b.max
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub structure: StructureDistribution,
    /// Prediction horizon in years.
    pub horizon: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            structure: StructureDistribution::default(),
            horizon: 10,
        }
    }
}

/// Unobserved quantities kept alongside each simulated member.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Latent {
    pub genotype: Genotype,
    pub breast_onset: Option<u32>,
    pub ovarian_onset: Option<u32>,
    pub death_age: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedFamily {
    pub pedigree: Pedigree,
    /// Breast cancer in the counselee within the horizon after baseline.
    pub y0: bool,
    pub latent: Vec<Latent>,
}

/// Number of structure draws rejected by the baseline exclusion rule before a
/// family is accepted; guards against configurations that can never succeed.
const MAX_RESAMPLES: usize = 100_000;

pub fn simulate_cohort(
    n: usize,
    config: &SimConfig,
    model: &PenetranceModel,
    master_seed: u64,
) -> Result<Vec<SimulatedFamily>> {
    config.structure.check()?;
    let tables = config.structure.tables()?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(seed::derive(master_seed, i as u64));
            simulate_family(&format!("F{i:06}"), &tables, config, model, &mut rng)
        })
        .collect()
}

/// Simulates one family, resampling until the counselee is alive and free of
/// breast cancer at baseline.
pub fn simulate_family_seeded(
    family_id: &str,
    config: &SimConfig,
    model: &PenetranceModel,
    seed: u64,
) -> Result<SimulatedFamily> {
    config.structure.check()?;
    let tables = config.structure.tables()?;
    simulate_family(family_id, &tables, config, model, &mut seed::rng(seed))
}

fn simulate_family(
    family_id: &str,
    tables: &[(RelativeType, Vec<f64>); 8],
    config: &SimConfig,
    model: &PenetranceModel,
    rng: &mut ChaCha8Rng,
) -> Result<SimulatedFamily> {
    for _ in 0..MAX_RESAMPLES {
        if let Some(f) = try_family(family_id, tables, config, model, rng)? {
            return Ok(f);
        }
    }
    Err(Error::Config(format!(
        "no admissible family after {MAX_RESAMPLES} draws; check the structure and penetrance configuration"
    )))
}

struct Draft {
    sex: Sex,
    mother: Option<usize>,
    father: Option<usize>,
    age: i64,
}

fn normal(rng: &mut ChaCha8Rng, p: NormalParams) -> f64 {
    if p.sd > 0.0 {
        Normal::new(p.mean, p.sd).expect("finite normal").sample(rng)
    } else {
        p.mean
    }
}

fn gap(rng: &mut ChaCha8Rng, model: &PenetranceModel) -> i64 {
    (normal(rng, model.age_gap).round() as i64).max(1)
}

fn death_age(rng: &mut ChaCha8Rng, model: &PenetranceModel) -> u32 {
    loop {
        let d = normal(rng, model.death_age).round();
        if (1.0..=110.0).contains(&d) {
            return d as u32;
        }
    }
}

/// Draws an onset age from a class table, or `None` for no onset by 94.
pub fn sample_onset(
    rng: &mut impl Rng,
    model: &PenetranceModel,
    class: CarrierClass,
    sex: Sex,
    cancer: Cancer,
) -> Option<u32> {
    let u: f64 = rng.gen();
    if u >= model.lifetime(class, sex, cancer) {
        return None;
    }
    (1..=MAX_AGE).find(|&a| u < model.onset_cdf(class, sex, cancer, a))
}

fn founder_genotype(rng: &mut ChaCha8Rng, prior: &[f64; 9]) -> Genotype {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (g, &p) in prior.iter().enumerate() {
        acc += p;
        if u < acc {
            return Genotype::from_index(g);
        }
    }
    // rounding slack: fall back to the last state with positive mass
    Genotype::from_index(prior.iter().rposition(|&p| p > 0.0).unwrap_or(0))
}

fn gamete(rng: &mut ChaCha8Rng, parent: Genotype) -> (u8, u8) {
    let pick = |rng: &mut ChaCha8Rng, copies: u8| match copies {
        0 => 0,
        2 => 1,
        _ => u8::from(rng.gen_bool(0.5)),
    };
    (pick(rng, parent.locus1()), pick(rng, parent.locus2()))
}

fn population_gamete(rng: &mut ChaCha8Rng, freqs: [f64; 2]) -> (u8, u8) {
    (u8::from(rng.gen_bool(freqs[0])), u8::from(rng.gen_bool(freqs[1])))
}

fn try_family(
    family_id: &str,
    tables: &[(RelativeType, Vec<f64>); 8],
    config: &SimConfig,
    model: &PenetranceModel,
    rng: &mut ChaCha8Rng,
) -> Result<Option<SimulatedFamily>> {
    let b = config.structure.baseline_age;
    let a0 = (normal(rng, NormalParams { mean: b.mean, sd: b.sd }).round() as i64).clamp(b.min as i64, b.max as i64);

    let mut drafts = Vec::with_capacity(24);
    let push = |drafts: &mut Vec<Draft>, sex, mother, father, age| {
        drafts.push(Draft {
            sex,
            mother,
            father,
            age,
        });
    };
    let mother_age = a0 + gap(rng, model);
    let father_age = a0 + gap(rng, model);
    push(&mut drafts, Sex::Female, Some(1), Some(2), a0);
    push(&mut drafts, Sex::Female, Some(3), Some(4), mother_age);
    push(&mut drafts, Sex::Male, Some(5), Some(6), father_age);
    let mgm = mother_age + gap(rng, model);
    let mgf = mother_age + gap(rng, model);
    let pgm = father_age + gap(rng, model);
    let pgf = father_age + gap(rng, model);
    push(&mut drafts, Sex::Female, None, None, mgm);
    push(&mut drafts, Sex::Male, None, None, mgf);
    push(&mut drafts, Sex::Female, None, None, pgm);
    push(&mut drafts, Sex::Male, None, None, pgf);

    for (kind, probs) in tables {
        let count = WeightedIndex::new(probs)
            .map_err(|e| Error::Config(format!("count table for {kind}: {e}")))?
            .sample(rng);
        for _ in 0..count {
            let (sex, mother, father, parent_age) = match kind {
                RelativeType::MaternalAunt => (Sex::Female, Some(3), Some(4), mgm),
                RelativeType::MaternalUncle => (Sex::Male, Some(3), Some(4), mgm),
                RelativeType::PaternalAunt => (Sex::Female, Some(5), Some(6), pgm),
                RelativeType::PaternalUncle => (Sex::Male, Some(5), Some(6), pgm),
                RelativeType::Sister => (Sex::Female, Some(1), Some(2), mother_age),
                RelativeType::Brother => (Sex::Male, Some(1), Some(2), mother_age),
                RelativeType::Daughter => (Sex::Female, Some(0), None, a0),
                _ => (Sex::Male, Some(0), None, a0),
            };
            let age = parent_age - gap(rng, model);
            if age > 0 {
                push(&mut drafts, sex, mother, father, age);
            }
        }
    }

    let prior = founder_prior(&model.loci);
    let freqs = model.allele_freqs();
    let n = drafts.len();
    let mut genotypes = vec![Genotype::new(0, 0); n];
    // parents always precede their children except for the counselee's own
    // parents, so fill founders first, then everyone else in index order
    let order = [3, 4, 5, 6, 1, 2].into_iter().chain(std::iter::once(0)).chain(7..n);
    for r in order {
        let d = &drafts[r];
        genotypes[r] = match (d.mother, d.father) {
            (None, None) => founder_genotype(rng, &prior),
            (Some(m), f) => {
                let gm = gamete(rng, genotypes[m]);
                let gf = match f {
                    Some(f) => gamete(rng, genotypes[f]),
                    None => population_gamete(rng, freqs),
                };
                Genotype::new(gm.0 + gf.0, gm.1 + gf.1)
            }
            (None, Some(_)) => unreachable!("simulated members never have only a father"),
        };
    }

    let mut members = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    let mut y0 = false;
    for (r, d) in drafts.iter().enumerate() {
        let class = genotypes[r].carrier_class();
        let death = death_age(rng, model);
        let breast_onset = sample_onset(rng, model, class, d.sex, Cancer::Breast);
        let ovarian_onset = if d.sex == Sex::Female {
            sample_onset(rng, model, class, d.sex, Cancer::Ovarian)
        } else {
            None
        };
        let deceased = (death as i64) < d.age;
        let observed = (d.age.min(death as i64) as u32).min(MAX_AGE);
        if r == 0 {
            if deceased || breast_onset.is_some_and(|o| o as i64 <= a0) {
                return Ok(None);
            }
            let end = a0 as u32 + config.horizon;
            y0 = breast_onset.is_some_and(|o| (o as i64) > a0 && o <= end);
        }
        let diag = |onset: Option<u32>| match onset {
            Some(o) if o <= observed => Diagnosis::at(o),
            _ => Diagnosis::UNAFFECTED,
        };
        members.push(Member {
            id: r,
            mother: d.mother,
            father: d.father,
            sex: d.sex,
            current_age: Some(observed),
            deceased,
            breast: diag(breast_onset),
            ovarian: diag(ovarian_onset),
        });
        latent.push(Latent {
            genotype: genotypes[r],
            breast_onset,
            ovarian_onset,
            death_age: death,
        });
    }
    Ok(Some(SimulatedFamily {
        pedigree: Pedigree::new(family_id, members),
        y0,
        latent,
    }))
}

//! Two-locus genotype space, founder priors, Mendelian transmission and
//! penetrance tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pedigree::{Diagnosis, Member, Sex, MAX_AGE};

/// Number of joint genotypes over two biallelic loci.
pub const N_GENOTYPES: usize = 9;
/// Table length: index 0 is unused so that `table[a]` is age `a`.
const TABLE_LEN: usize = MAX_AGE as usize + 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocusModel {
    pub name: String,
    /// Frequency of the pathogenic allele.
    pub allele_freq: f64,
}

impl LocusModel {
    pub fn new(name: impl Into<String>, allele_freq: f64) -> LocusModel {
        LocusModel {
            name: name.into(),
            allele_freq,
        }
    }

    /// Hardy-Weinberg probabilities of 0, 1 and 2 pathogenic alleles.
    pub fn hwe(&self) -> [f64; 3] {
        let f = self.allele_freq;
        [(1.0 - f) * (1.0 - f), 2.0 * f * (1.0 - f), f * f]
    }

    fn check(&self) -> Result<()> {
        let f = self.allele_freq;
        if !(0.0..0.5).contains(&f) {
            return Err(Error::Config(format!(
                "allele frequency for {} must lie in [0, 0.5), got {f}",
                self.name
            )));
        }
        Ok(())
    }
}

/// Joint genotype: pathogenic allele counts at locus 1 and locus 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genotype(u8);

impl Genotype {
    pub fn new(locus1: u8, locus2: u8) -> Genotype {
        assert!(locus1 < 3 && locus2 < 3, "allele counts must be 0..=2");
        Genotype(locus1 * 3 + locus2)
    }

    pub fn from_index(i: usize) -> Genotype {
        assert!(i < N_GENOTYPES);
        Genotype(i as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn locus1(self) -> u8 {
        self.0 / 3
    }

    pub fn locus2(self) -> u8 {
        self.0 % 3
    }

    pub fn all() -> impl Iterator<Item = Genotype> {
        (0..N_GENOTYPES as u8).map(Genotype)
    }

    pub fn carrier_class(self) -> CarrierClass {
        match (self.locus1() > 0, self.locus2() > 0) {
            (false, false) => CarrierClass::Noncarrier,
            (true, false) => CarrierClass::Locus1,
            (false, true) => CarrierClass::Locus2,
            (true, true) => CarrierClass::Both,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarrierClass {
    Noncarrier,
    Locus1,
    Locus2,
    Both,
}

impl CarrierClass {
    pub const ALL: [CarrierClass; 4] = [
        CarrierClass::Noncarrier,
        CarrierClass::Locus1,
        CarrierClass::Locus2,
        CarrierClass::Both,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cancer {
    Breast,
    Ovarian,
}

impl Cancer {
    pub const ALL: [Cancer; 2] = [Cancer::Breast, Cancer::Ovarian];

    fn index(self) -> usize {
        self as usize
    }

    pub fn of(self, m: &Member) -> Diagnosis {
        match self {
            Cancer::Breast => m.breast,
            Cancer::Ovarian => m.ovarian,
        }
    }
}

fn sex_index(s: Sex) -> usize {
    s.code() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalParams {
    pub mean: f64,
    pub sd: f64,
}

/// Onset-age distributions per (carrier class, sex, cancer), plus the
/// demographic parameters the simulator needs.
#[derive(Clone, Debug, PartialEq)]
pub struct PenetranceModel {
    pub loci: [LocusModel; 2],
    /// `pmf[class][sex][cancer][age]`: probability of onset at exactly `age`.
    pmf: Vec<[f64; TABLE_LEN]>,
    /// Cumulative onset probability through `age`.
    cdf: Vec<[f64; TABLE_LEN]>,
    pub death_age: NormalParams,
    pub age_gap: NormalParams,
}

fn slot(class: CarrierClass, sex: Sex, cancer: Cancer) -> usize {
    class.index() * 4 + sex_index(sex) * 2 + cancer.index()
}

impl PenetranceModel {
    /// Builds a model from explicit onset tables. `table(class, sex, cancer)`
    /// must return 94 values for ages 1..=94.
    pub fn from_tables(
        loci: [LocusModel; 2],
        mut table: impl FnMut(CarrierClass, Sex, Cancer) -> Vec<f64>,
        death_age: NormalParams,
        age_gap: NormalParams,
    ) -> Result<PenetranceModel> {
        for l in &loci {
            l.check()?;
        }
        let mut pmf = vec![[0.0; TABLE_LEN]; 16];
        let mut cdf = vec![[0.0; TABLE_LEN]; 16];
        for class in CarrierClass::ALL {
            for sex in [Sex::Female, Sex::Male] {
                for cancer in Cancer::ALL {
                    let values = table(class, sex, cancer);
                    if values.len() != MAX_AGE as usize {
                        return Err(Error::Config(format!(
                            "penetrance table for {class:?}/{sex:?}/{cancer:?} has {} ages, expected {MAX_AGE}",
                            values.len()
                        )));
                    }
                    let k = slot(class, sex, cancer);
                    let mut acc = 0.0;
                    for (a, &v) in values.iter().enumerate() {
                        if !(v >= 0.0) {
                            return Err(Error::Config(format!(
                                "negative penetrance {v} for {class:?}/{sex:?}/{cancer:?} at age {}",
                                a + 1
                            )));
                        }
                        acc += v;
                        pmf[k][a + 1] = v;
                        cdf[k][a + 1] = acc;
                    }
                    if acc > 1.0 + 1e-12 {
                        return Err(Error::Config(format!(
                            "penetrance for {class:?}/{sex:?}/{cancer:?} sums to {acc} > 1"
                        )));
                    }
                    if sex == Sex::Male && cancer == Cancer::Ovarian && acc != 0.0 {
                        return Err(Error::Config("male ovarian penetrance must be zero".into()));
                    }
                }
            }
        }
        Ok(PenetranceModel {
            loci,
            pmf,
            cdf,
            death_age,
            age_gap,
        })
    }

    /// Probability of onset at exactly `age` (0 outside 1..=94).
    pub fn onset_pmf(&self, class: CarrierClass, sex: Sex, cancer: Cancer, age: u32) -> f64 {
        if age == 0 || age > MAX_AGE {
            return 0.0;
        }
        self.pmf[slot(class, sex, cancer)][age as usize]
    }

    /// Probability of onset at or before `age` (ages above 94 clamp).
    pub fn onset_cdf(&self, class: CarrierClass, sex: Sex, cancer: Cancer, age: u32) -> f64 {
        self.cdf[slot(class, sex, cancer)][age.min(MAX_AGE) as usize]
    }

    pub fn lifetime(&self, class: CarrierClass, sex: Sex, cancer: Cancer) -> f64 {
        self.onset_cdf(class, sex, cancer, MAX_AGE)
    }

    /// Onset probabilities for ages 1..=94.
    pub fn table(&self, class: CarrierClass, sex: Sex, cancer: Cancer) -> &[f64] {
        &self.pmf[slot(class, sex, cancer)][1..]
    }

    pub fn allele_freqs(&self) -> [f64; 2] {
        [self.loci[0].allele_freq, self.loci[1].allele_freq]
    }

    pub fn from_config_file(path: &Path) -> Result<PenetranceModel> {
        let cfg: PenetranceConfig = serde_json::from_reader(std::fs::File::open(path)?)?;
        build_default_penetrance(&cfg)
    }
}

/// Founder genotype distribution: product of per-locus Hardy-Weinberg priors.
pub fn founder_prior(loci: &[LocusModel; 2]) -> [f64; N_GENOTYPES] {
    let a = loci[0].hwe();
    let b = loci[1].hwe();
    let mut out = [0.0; N_GENOTYPES];
    for g in Genotype::all() {
        out[g.index()] = a[g.locus1() as usize] * b[g.locus2() as usize];
    }
    out
}

/// Collapses a distribution over joint genotypes to carrier classes.
pub fn collapse(joint: &[f64; N_GENOTYPES]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for g in Genotype::all() {
        out[g.carrier_class().index()] += joint[g.index()];
    }
    out
}

/// Probability that a parent with `count` pathogenic alleles transmits one.
fn gamete(count: u8) -> f64 {
    count as f64 / 2.0
}

fn locus_segregation(child: u8, p_mother: f64, p_father: f64) -> f64 {
    match child {
        0 => (1.0 - p_mother) * (1.0 - p_father),
        1 => p_mother * (1.0 - p_father) + (1.0 - p_mother) * p_father,
        2 => p_mother * p_father,
        _ => 0.0,
    }
}

/// P(child genotype | mother genotype, father genotype), Mendelian segregation
/// independently at each locus.
pub fn transmission_prob(child: Genotype, mother: Genotype, father: Genotype) -> f64 {
    locus_segregation(child.locus1(), gamete(mother.locus1()), gamete(father.locus1()))
        * locus_segregation(child.locus2(), gamete(mother.locus2()), gamete(father.locus2()))
}

/// P(child genotype | one known parent), the other parent being an unobserved
/// founder: its gamete carries the pathogenic allele with the population
/// allele frequency.
pub fn transmission_prob_one_parent(child: Genotype, parent: Genotype, freqs: [f64; 2]) -> f64 {
    locus_segregation(child.locus1(), gamete(parent.locus1()), freqs[0])
        * locus_segregation(child.locus2(), gamete(parent.locus2()), freqs[1])
}

/// Dense 9x9x9 transmission table indexed `[child][mother][father]`.
pub fn transmission_table() -> Vec<f64> {
    let mut t = vec![0.0; N_GENOTYPES * N_GENOTYPES * N_GENOTYPES];
    for c in Genotype::all() {
        for m in Genotype::all() {
            for f in Genotype::all() {
                t[(c.index() * N_GENOTYPES + m.index()) * N_GENOTYPES + f.index()] = transmission_prob(c, m, f);
            }
        }
    }
    t
}

/// P(observed cancer history | carrier class).
///
/// Per cancer: affected at a known age contributes the onset probability at
/// that age; affected at an unknown age contributes the cumulative probability
/// through the current age (or the lifetime probability if that is also
/// unknown); unaffected contributes survival through the current age.
pub fn phenotype_likelihood(member: &Member, class: CarrierClass, model: &PenetranceModel) -> Result<f64> {
    let mut lik = 1.0;
    for cancer in Cancer::ALL {
        let d = cancer.of(member);
        let factor = if d.affected {
            match d.onset_age {
                Some(a) if a == 0 || a > MAX_AGE => return Err(Error::OnsetOutOfSupport { age: a, max: MAX_AGE }),
                Some(a) => model.onset_pmf(class, member.sex, cancer, a),
                None => model.onset_cdf(class, member.sex, cancer, member.current_age.unwrap_or(MAX_AGE)),
            }
        } else {
            match member.current_age {
                Some(a) => 1.0 - model.onset_cdf(class, member.sex, cancer, a),
                None => 1.0,
            }
        };
        lik *= factor;
    }
    Ok(lik)
}

/// Likelihood of a member's phenotype for each of the 9 joint genotypes.
pub fn genotype_likelihoods(member: &Member, model: &PenetranceModel) -> Result<[f64; N_GENOTYPES]> {
    let mut by_class = [0.0; 4];
    for c in CarrierClass::ALL {
        by_class[c.index()] = phenotype_likelihood(member, c, model)?;
    }
    let mut out = [0.0; N_GENOTYPES];
    for g in Genotype::all() {
        out[g.index()] = by_class[g.carrier_class().index()];
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTargets {
    pub noncarrier: f64,
    pub locus1: f64,
    pub locus2: f64,
    pub both: f64,
}

impl ClassTargets {
    pub fn get(&self, c: CarrierClass) -> f64 {
        match c {
            CarrierClass::Noncarrier => self.noncarrier,
            CarrierClass::Locus1 => self.locus1,
            CarrierClass::Locus2 => self.locus2,
            CarrierClass::Both => self.both,
        }
    }

    pub fn uniform(v: f64) -> ClassTargets {
        ClassTargets {
            noncarrier: v,
            locus1: v,
            locus2: v,
            both: v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    /// Weibull cumulative hazard `(age / scale)^shape`, with the two
    /// parameters fit so the curve reaches the lifetime target at 94 and half
    /// of it at the median onset age.
    Weibull,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianOnset {
    pub noncarrier: f64,
    pub carrier: f64,
}

/// Synthetic penetrance configuration (JSON file form).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenetranceConfig {
    pub loci: [LocusModel; 2],
    pub shape: ShapeFamily,
    pub breast_female: ClassTargets,
    pub breast_male: ClassTargets,
    pub ovarian_female: ClassTargets,
    pub median_onset: MedianOnset,
    pub death_age: NormalParams,
    pub age_gap: NormalParams,
}

impl Default for PenetranceConfig {
    fn default() -> Self {
        PenetranceConfig {
            loci: [LocusModel::new("locus1", 0.014), LocusModel::new("locus2", 0.012)],
            shape: ShapeFamily::Weibull,
            breast_female: ClassTargets {
                noncarrier: 0.12,
                locus1: 0.65,
                locus2: 0.55,
                both: 0.79,
            },
            breast_male: ClassTargets {
                noncarrier: 0.001,
                locus1: 0.012,
                locus2: 0.068,
                both: 0.07,
            },
            ovarian_female: ClassTargets {
                noncarrier: 0.015,
                locus1: 0.40,
                locus2: 0.18,
                both: 0.45,
            },
            median_onset: MedianOnset {
                noncarrier: 65.0,
                carrier: 45.0,
            },
            death_age: NormalParams { mean: 80.0, sd: 15.0 },
            age_gap: NormalParams { mean: 27.0, sd: 6.0 },
        }
    }
}

/// Discretized onset distribution over ages 1..=94 with total mass `lifetime`
/// and half of that mass reached at `median`.
pub fn weibull_onset_table(lifetime: f64, median: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&lifetime) {
        return Err(Error::Config(format!(
            "lifetime penetrance must lie in [0, 1), got {lifetime}"
        )));
    }
    if !(median > 0.0 && median < MAX_AGE as f64) {
        return Err(Error::Config(format!(
            "median onset age must lie in (0, {MAX_AGE}), got {median}"
        )));
    }
    if lifetime == 0.0 {
        return Ok(vec![0.0; MAX_AGE as usize]);
    }
    // H(94) = -ln(1 - L), H(median) = -ln(1 - L/2), H(a) = (a / scale)^shape
    let h_end = -(1.0 - lifetime).ln();
    let h_mid = -(1.0 - lifetime / 2.0).ln();
    let shape = (h_end / h_mid).ln() / (MAX_AGE as f64 / median).ln();
    let scale = MAX_AGE as f64 / h_end.powf(1.0 / shape);
    let cdf = |a: f64| 1.0 - (-(a / scale).powf(shape)).exp();
    let mut out: Vec<f64> = (1..=MAX_AGE).map(|a| cdf(a as f64) - cdf(a as f64 - 1.0)).collect();
    // pin the total to the target against rounding drift
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v *= lifetime / total;
    }
    Ok(out)
}

/// Builds the synthetic penetrance model described by `config`.
pub fn build_default_penetrance(config: &PenetranceConfig) -> Result<PenetranceModel> {
    let ShapeFamily::Weibull = config.shape;
    let mut tables = Vec::with_capacity(16);
    for class in CarrierClass::ALL {
        let median = if class == CarrierClass::Noncarrier {
            config.median_onset.noncarrier
        } else {
            config.median_onset.carrier
        };
        for sex in [Sex::Female, Sex::Male] {
            for cancer in Cancer::ALL {
                let target = match (sex, cancer) {
                    (Sex::Female, Cancer::Breast) => config.breast_female.get(class),
                    (Sex::Male, Cancer::Breast) => config.breast_male.get(class),
                    (Sex::Female, Cancer::Ovarian) => config.ovarian_female.get(class),
                    (Sex::Male, Cancer::Ovarian) => 0.0,
                };
                tables.push(((class, sex, cancer), weibull_onset_table(target, median)?));
            }
        }
    }
    let model = PenetranceModel::from_tables(
        config.loci.clone(),
        |c, s, k| {
            tables
                .iter()
                .find(|(key, _)| *key == (c, s, k))
                .map(|(_, t)| t.clone())
                .unwrap()
        },
        config.death_age,
        config.age_gap,
    )?;
    for class in &CarrierClass::ALL[1..] {
        for a in 1..=MAX_AGE {
            let carrier = model.onset_cdf(*class, Sex::Female, Cancer::Breast, a);
            let non = model.onset_cdf(CarrierClass::Noncarrier, Sex::Female, Cancer::Breast, a);
            if carrier + 1e-12 < non {
                return Err(Error::Config(format!(
                    "{class:?} breast penetrance falls below noncarrier at age {a}"
                )));
            }
        }
    }
    Ok(model)
}

impl PenetranceModel {
    /// The model built from [`PenetranceConfig::default`].
    pub fn default_synthetic() -> PenetranceModel {
        build_default_penetrance(&PenetranceConfig::default()).expect("default penetrance config is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> PenetranceModel {
        PenetranceModel::default_synthetic()
    }

    #[test]
    fn founder_prior_carrier_mass_matches_hwe() {
        let loci = [LocusModel::new("a", 0.014), LocusModel::new("b", 0.012)];
        let p = founder_prior(&loci);
        let at_least_one_l1: f64 = Genotype::all().filter(|g| g.locus1() > 0).map(|g| p[g.index()]).sum();
        // 1 - (1 - 0.014)^2
        assert!((at_least_one_l1 - 0.027804).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn founder_prior_zero_frequency_limit() {
        let loci = [LocusModel::new("a", 0.0), LocusModel::new("b", 0.0)];
        let p = founder_prior(&loci);
        assert_eq!(p[Genotype::new(0, 0).index()], 1.0);
        assert_eq!(p.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn segregation_examples() {
        let het = Genotype::new(1, 0);
        let non = Genotype::new(0, 0);
        assert_eq!(transmission_prob(Genotype::new(1, 0), het, non), 0.5);
        let hom = Genotype::new(2, 2);
        assert_eq!(transmission_prob(hom, hom, hom), 1.0);
    }

    #[test]
    fn transmission_is_a_distribution_for_every_parent_pair() {
        for m in Genotype::all() {
            for f in Genotype::all() {
                let s: f64 = Genotype::all().map(|c| transmission_prob(c, m, f)).sum();
                assert!((s - 1.0).abs() < 1e-15);
            }
            let s: f64 = Genotype::all()
                .map(|c| transmission_prob_one_parent(c, m, [0.014, 0.012]))
                .sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn one_parent_transmission_marginalizes_founder() {
        let loci = [LocusModel::new("a", 0.03), LocusModel::new("b", 0.2)];
        let prior = founder_prior(&loci);
        for c in Genotype::all() {
            for p in Genotype::all() {
                let direct = transmission_prob_one_parent(c, p, [0.03, 0.2]);
                let summed: f64 = Genotype::all()
                    .map(|o| prior[o.index()] * transmission_prob(c, p, o))
                    .sum();
                assert!((direct - summed).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn default_lifetime_targets() {
        let m = model();
        let f = Sex::Female;
        assert!((m.lifetime(CarrierClass::Noncarrier, f, Cancer::Breast) - 0.12).abs() < 1e-6);
        assert!((m.lifetime(CarrierClass::Both, f, Cancer::Breast) - 0.79).abs() < 1e-6);
        assert_eq!(m.lifetime(CarrierClass::Both, Sex::Male, Cancer::Ovarian), 0.0);
    }

    #[test]
    fn carrier_cumulative_dominates_noncarrier() {
        let m = model();
        for c in &CarrierClass::ALL[1..] {
            for a in 1..=MAX_AGE {
                assert!(
                    m.onset_cdf(*c, Sex::Female, Cancer::Breast, a)
                        >= m.onset_cdf(CarrierClass::Noncarrier, Sex::Female, Cancer::Breast, a)
                );
            }
        }
    }

    #[test]
    fn weibull_table_hits_median() {
        let t = weibull_onset_table(0.5, 50.0).unwrap();
        let through_50: f64 = t[..50].iter().sum();
        assert!((through_50 - 0.25).abs() < 1e-9);
        assert!((t.iter().sum::<f64>() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_target_gives_zero_table() {
        assert!(weibull_onset_table(0.0, 60.0).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn infeasible_target_rejected() {
        assert!(weibull_onset_table(1.2, 60.0).is_err());
        let mut cfg = PenetranceConfig::default();
        cfg.breast_female.both = 1.5;
        assert!(build_default_penetrance(&cfg).is_err());
    }

    #[test]
    fn likelihood_examples() {
        let m = model();
        let mut baby = Member::new(0, Sex::Female, 0);
        for c in CarrierClass::ALL {
            assert_eq!(phenotype_likelihood(&baby, c, &m).unwrap(), 1.0);
        }
        baby.current_age = Some(55);
        baby.breast = Diagnosis::at(48);
        for c in CarrierClass::ALL {
            let expected = m.onset_pmf(c, Sex::Female, Cancer::Breast, 48)
                * (1.0 - m.onset_cdf(c, Sex::Female, Cancer::Ovarian, 55));
            assert_eq!(phenotype_likelihood(&baby, c, &m).unwrap(), expected);
        }
        baby.breast = Diagnosis::at(95);
        assert!(matches!(
            phenotype_likelihood(&baby, CarrierClass::Both, &m),
            Err(Error::OnsetOutOfSupport { .. })
        ));
    }

    #[test]
    fn male_ovarian_factor_is_one() {
        let m = model();
        let man = Member::new(0, Sex::Male, 70);
        for c in CarrierClass::ALL {
            let l = phenotype_likelihood(&man, c, &m).unwrap();
            assert_eq!(l, 1.0 - m.onset_cdf(c, Sex::Male, Cancer::Breast, 70));
        }
    }

    #[test]
    fn identical_tables_give_identical_likelihoods() {
        let flat = weibull_onset_table(0.3, 55.0).unwrap();
        let m = PenetranceModel::from_tables(
            [LocusModel::new("a", 0.014), LocusModel::new("b", 0.012)],
            |_, s, k| {
                if s == Sex::Male && k == Cancer::Ovarian {
                    vec![0.0; 94]
                } else {
                    flat.clone()
                }
            },
            NormalParams { mean: 80.0, sd: 15.0 },
            NormalParams { mean: 27.0, sd: 6.0 },
        )
        .unwrap();
        let mut x = Member::new(0, Sex::Female, 61);
        x.breast = Diagnosis::at(44);
        let l: Vec<f64> = CarrierClass::ALL
            .iter()
            .map(|c| phenotype_likelihood(&x, *c, &m).unwrap())
            .collect();
        assert!(l.iter().all(|&v| v == l[0]));
    }

    #[test]
    fn likelihood_nonincreasing_in_unaffected_age() {
        let m = model();
        for c in CarrierClass::ALL {
            let mut prev = f64::INFINITY;
            for a in 0..=MAX_AGE {
                let x = Member::new(0, Sex::Female, a);
                let l = phenotype_likelihood(&x, c, &m).unwrap();
                assert!(l <= prev);
                prev = l;
            }
        }
    }

    #[test]
    fn class_collapse_commutes_with_transmission() {
        // the child's carrier status at locus 1 depends only on parental locus-1 counts
        for m in Genotype::all() {
            for f in Genotype::all() {
                let p_l1: f64 = Genotype::all()
                    .filter(|c| c.locus1() > 0)
                    .map(|c| transmission_prob(c, m, f))
                    .sum();
                let m2 = Genotype::new(m.locus1(), 0);
                let f2 = Genotype::new(f.locus1(), 2);
                let q_l1: f64 = Genotype::all()
                    .filter(|c| c.locus1() > 0)
                    .map(|c| transmission_prob(c, m2, f2))
                    .sum();
                assert!((p_l1 - q_l1).abs() < 1e-15);
            }
        }
    }
}

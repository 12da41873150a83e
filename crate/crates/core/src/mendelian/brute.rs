//! Direct enumeration of every joint genotype assignment.
//!
//! Exponential in family size; used as an oracle for the peeling engine.
//! Branches whose running product is exactly zero are skipped, which leaves
//! the sum unchanged.

use super::{normalize, CarrierPosterior};
use crate::error::{Error, Result};
use crate::genetics::{
    collapse, founder_prior, genotype_likelihoods, transmission_prob, Genotype, PenetranceModel, N_GENOTYPES,
};
use crate::pedigree::Pedigree;

/// Largest family (counselee included) the enumeration accepts.
pub const BRUTE_FORCE_MAX_MEMBERS: usize = 10;

enum Origin {
    Founder,
    OneParent(usize),
    TwoParents(usize, usize),
}

struct Enumeration<'a> {
    order: &'a [usize],
    origin: &'a [Origin],
    lik: &'a [[f64; N_GENOTYPES]],
    prior: [f64; N_GENOTYPES],
    /// P(child | known parent) with the unknown parent summed over the founder prior.
    one_parent: [[f64; N_GENOTYPES]; N_GENOTYPES],
    assigned: Vec<usize>,
    joint: [f64; N_GENOTYPES],
}

impl Enumeration<'_> {
    fn descend(&mut self, depth: usize, weight: f64) {
        if depth == self.order.len() {
            self.joint[self.assigned[0]] += weight;
            return;
        }
        let r = self.order[depth];
        for g in 0..N_GENOTYPES {
            let factor = match self.origin[r] {
                Origin::Founder => self.prior[g],
                Origin::OneParent(p) => self.one_parent[g][self.assigned[p]],
                Origin::TwoParents(m, f) => transmission_prob(
                    Genotype::from_index(g),
                    Genotype::from_index(self.assigned[m]),
                    Genotype::from_index(self.assigned[f]),
                ),
            } * self.lik[r][g];
            if factor == 0.0 {
                continue;
            }
            self.assigned[r] = g;
            self.descend(depth + 1, weight * factor);
        }
    }
}

/// Unnormalized-then-normalized joint posterior over the counselee's genotype.
pub fn brute_force_joint(p: &Pedigree, model: &PenetranceModel) -> Result<[f64; N_GENOTYPES]> {
    let n = p.len();
    if n == 0 {
        return Err(Error::Prediction("empty pedigree".into()));
    }
    if n > BRUTE_FORCE_MAX_MEMBERS {
        return Err(Error::FamilyTooLarge {
            family_id: p.family_id.clone(),
            size: n,
            max: BRUTE_FORCE_MAX_MEMBERS,
        });
    }
    // parents before children
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let before = order.len();
        for m in &p.members {
            if !placed[m.id] && m.parents().all(|x| x < n && placed[x]) {
                placed[m.id] = true;
                order.push(m.id);
            }
        }
        if order.len() == before {
            return Err(Error::Prediction(format!(
                "family {} has a parent cycle or dangling parent",
                p.family_id
            )));
        }
    }
    let origin: Vec<Origin> = p
        .members
        .iter()
        .map(|m| match (m.mother, m.father) {
            (None, None) => Origin::Founder,
            (Some(x), None) | (None, Some(x)) => Origin::OneParent(x),
            (Some(mo), Some(fa)) => Origin::TwoParents(mo, fa),
        })
        .collect();
    let lik = p
        .members
        .iter()
        .map(|m| genotype_likelihoods(m, model))
        .collect::<Result<Vec<_>>>()?;
    let prior = founder_prior(&model.loci);
    let mut one_parent = [[0.0; N_GENOTYPES]; N_GENOTYPES];
    for c in Genotype::all() {
        for par in Genotype::all() {
            one_parent[c.index()][par.index()] = Genotype::all()
                .map(|o| prior[o.index()] * transmission_prob(c, par, o))
                .sum();
        }
    }
    let mut e = Enumeration {
        order: &order,
        origin: &origin,
        lik: &lik,
        prior,
        one_parent,
        assigned: vec![0; n],
        joint: [0.0; N_GENOTYPES],
    };
    e.descend(0, 1.0);
    let mut joint = e.joint;
    if normalize(&mut joint) == 0.0 {
        return Err(Error::Degenerate(format!("family {} has zero likelihood", p.family_id)));
    }
    Ok(joint)
}

pub fn brute_force_posterior(p: &Pedigree, model: &PenetranceModel) -> Result<CarrierPosterior> {
    Ok(CarrierPosterior(collapse(&brute_force_joint(p, model)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genetics::{build_default_penetrance, Cancer, CarrierClass, LocusModel, PenetranceConfig};
    use crate::pedigree::{Diagnosis, Member, Sex};

    #[test]
    fn unobserved_pair_gives_prior() {
        let model = PenetranceModel::default_synthetic();
        let mut c = Member::new(0, Sex::Female, 0).with_parents(Some(1), None);
        c.current_age = None;
        let mut mom = Member::new(1, Sex::Female, 0);
        mom.current_age = None;
        let p = Pedigree::new("x", vec![c, mom]);
        let post = brute_force_posterior(&p, &model).unwrap();
        let prior = collapse(&founder_prior(&model.loci));
        assert!(post.max_abs_diff(&CarrierPosterior(prior)) < 1e-15);
    }

    #[test]
    fn single_locus_hand_table() {
        // locus 2 switched off: three states for the counselee (0, 1, 2 copies)
        let mut cfg = PenetranceConfig::default();
        cfg.loci = [LocusModel::new("locus1", 0.05), LocusModel::new("locus2", 0.0)];
        let model = build_default_penetrance(&cfg).unwrap();
        let mut mom = Member::new(1, Sex::Female, 62);
        mom.breast = Diagnosis::at(41);
        let daughter = Member::new(0, Sex::Female, 30).with_parents(Some(1), None);
        let p = Pedigree::new("x", vec![daughter.clone(), mom.clone()]);
        let post = brute_force_posterior(&p, &model).unwrap();

        // hand enumeration over mother's and counselee's locus-1 counts
        let f = 0.05;
        let prior = [(1.0 - f) * (1.0 - f), 2.0 * f * (1.0 - f), f * f];
        let class = |k: usize| {
            if k == 0 {
                CarrierClass::Noncarrier
            } else {
                CarrierClass::Locus1
            }
        };
        let lik_mom = |k: usize| {
            model.onset_pmf(class(k), Sex::Female, Cancer::Breast, 41)
                * (1.0 - model.onset_cdf(class(k), Sex::Female, Cancer::Ovarian, 62))
        };
        let lik_kid = |k: usize| {
            (1.0 - model.onset_cdf(class(k), Sex::Female, Cancer::Breast, 30))
                * (1.0 - model.onset_cdf(class(k), Sex::Female, Cancer::Ovarian, 30))
        };
        // child count = maternal gamete + population gamete
        let trans = |c: usize, m: usize| {
            let pm = m as f64 / 2.0;
            match c {
                0 => (1.0 - pm) * (1.0 - f),
                1 => pm * (1.0 - f) + (1.0 - pm) * f,
                _ => pm * f,
            }
        };
        let mut joint = [0.0; 3];
        for m in 0..3 {
            for c in 0..3 {
                joint[c] += prior[m] * lik_mom(m) * trans(c, m) * lik_kid(c);
            }
        }
        let z: f64 = joint.iter().sum();
        assert!((post.get(CarrierClass::Noncarrier) - joint[0] / z).abs() < 1e-12);
        assert!((post.get(CarrierClass::Locus1) - (joint[1] + joint[2]) / z).abs() < 1e-12);
        assert_eq!(post.get(CarrierClass::Locus2), 0.0);
        assert_eq!(post.get(CarrierClass::Both), 0.0);
    }

    #[test]
    fn too_large_family_rejected() {
        let model = PenetranceModel::default_synthetic();
        let members = (0..11).map(|i| Member::new(i, Sex::Female, 30)).collect();
        let p = Pedigree::new("big", members);
        assert!(matches!(
            brute_force_posterior(&p, &model),
            Err(Error::FamilyTooLarge { size: 11, .. })
        ));
    }
}

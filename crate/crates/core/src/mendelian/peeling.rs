//! Elston-Stewart peeling over the individual / nuclear-family tree.
//!
//! A loop-free pedigree is a tree once individuals and nuclear families are
//! both treated as nodes. Rooting that tree at the counselee, each node sends
//! one message towards the root; the counselee's belief is its own evidence
//! times the messages it receives. Work per family unit is bounded by the
//! 9x9 parental state space, so total time is linear in family size.

use std::collections::VecDeque;

use super::{normalize, CarrierPosterior};
use crate::error::{Error, Result};
use crate::genetics::{
    collapse, founder_prior, genotype_likelihoods, transmission_prob_one_parent, transmission_table, Genotype,
    PenetranceModel, N_GENOTYPES,
};
use crate::pedigree::{family_units, FamilyUnit, Pedigree};

type Msg = [f64; N_GENOTYPES];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Node {
    Person(usize),
    Unit(usize),
}

/// Posterior over the counselee's 9 joint genotypes.
pub fn joint_posterior_peeling(p: &Pedigree, model: &PenetranceModel) -> Result<Msg> {
    let n = p.len();
    if n == 0 {
        return Err(Error::Prediction("empty pedigree".into()));
    }
    if let Some(m) = p.members.iter().find(|m| m.parents().any(|x| x >= n)) {
        return Err(Error::IndexOutOfRange {
            index: m.parents().max().unwrap(),
            size: n,
        });
    }
    if p.has_loop() {
        return Err(Error::LoopDetected {
            family_id: p.family_id.clone(),
        });
    }

    let prior = founder_prior(&model.loci);
    let mut evidence: Vec<Msg> = Vec::with_capacity(n);
    for m in &p.members {
        let mut e = genotype_likelihoods(m, model)?;
        if m.is_founder() {
            for g in 0..N_GENOTYPES {
                e[g] *= prior[g];
            }
        }
        evidence.push(e);
    }

    let units = family_units(p);
    let mut person_units: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, u) in units.iter().enumerate() {
        for v in u.members() {
            person_units[v].push(k);
        }
    }

    // breadth-first order from the counselee; parents[] records the tree edge
    let mut order = Vec::new();
    let mut person_parent = vec![None; n];
    let mut unit_parent = vec![usize::MAX; units.len()];
    let mut seen_person = vec![false; n];
    let mut seen_unit = vec![false; units.len()];
    let mut queue = VecDeque::from([Node::Person(0)]);
    seen_person[0] = true;
    while let Some(node) = queue.pop_front() {
        order.push(node);
        match node {
            Node::Person(v) => {
                for &k in &person_units[v] {
                    if !seen_unit[k] {
                        seen_unit[k] = true;
                        unit_parent[k] = v;
                        queue.push_back(Node::Unit(k));
                    }
                }
            }
            Node::Unit(k) => {
                for v in units[k].members() {
                    if !seen_person[v] {
                        seen_person[v] = true;
                        person_parent[v] = Some(k);
                        queue.push_back(Node::Person(v));
                    }
                }
            }
        }
    }

    let trans = transmission_table();
    let freqs = model.allele_freqs();
    let mut person_msg: Vec<Msg> = vec![[0.0; N_GENOTYPES]; n];
    let mut unit_msg: Vec<Msg> = vec![[0.0; N_GENOTYPES]; units.len()];

    for &node in order.iter().rev() {
        match node {
            Node::Person(v) => {
                let mut m = evidence[v];
                for &k in &person_units[v] {
                    if person_parent[v] != Some(k) {
                        mul_assign(&mut m, &unit_msg[k]);
                    }
                }
                if v != 0 && normalize(&mut m) == 0.0 {
                    return Err(zero_likelihood(p));
                }
                person_msg[v] = m;
            }
            Node::Unit(k) => {
                let target = unit_parent[k];
                let mut m = unit_message(&units[k], target, &person_msg, &trans, freqs);
                if normalize(&mut m) == 0.0 {
                    return Err(zero_likelihood(p));
                }
                unit_msg[k] = m;
            }
        }
    }

    let mut belief = person_msg[0];
    if normalize(&mut belief) == 0.0 {
        return Err(zero_likelihood(p));
    }
    Ok(belief)
}

/// Counselee carrier-class posterior computed by peeling.
pub fn carrier_posterior_peeling(p: &Pedigree, model: &PenetranceModel) -> Result<CarrierPosterior> {
    Ok(CarrierPosterior(collapse(&joint_posterior_peeling(p, model)?)))
}

fn zero_likelihood(p: &Pedigree) -> Error {
    Error::Degenerate(format!(
        "family {} has zero likelihood under every genotype configuration",
        p.family_id
    ))
}

fn mul_assign(a: &mut Msg, b: &Msg) {
    for g in 0..N_GENOTYPES {
        a[g] *= b[g];
    }
}

#[inline]
fn t_at(trans: &[f64], c: usize, m: usize, f: usize) -> f64 {
    trans[(c * N_GENOTYPES + m) * N_GENOTYPES + f]
}

/// Message from a family unit to `target`, summing out the other members.
fn unit_message(unit: &FamilyUnit, target: usize, msgs: &[Msg], trans: &[f64], freqs: [f64; 2]) -> Msg {
    let mut out = [0.0; N_GENOTYPES];
    match unit {
        FamilyUnit::SingleParent { parent, child } => {
            for gp in Genotype::all() {
                for gc in Genotype::all() {
                    let t = transmission_prob_one_parent(gc, gp, freqs);
                    if target == *child {
                        out[gc.index()] += t * msgs[*parent][gp.index()];
                    } else {
                        out[gp.index()] += t * msgs[*child][gc.index()];
                    }
                }
            }
        }
        FamilyUnit::Couple {
            mother,
            father,
            children,
        } => {
            // product over non-target children of sum_c T(c|m,f) msg_c(c)
            let mut pair = [[1.0f64; N_GENOTYPES]; N_GENOTYPES];
            for &c in children.iter().filter(|&&c| c != target) {
                for gm in 0..N_GENOTYPES {
                    for gf in 0..N_GENOTYPES {
                        let mut s = 0.0;
                        for gc in 0..N_GENOTYPES {
                            s += t_at(trans, gc, gm, gf) * msgs[c][gc];
                        }
                        pair[gm][gf] *= s;
                    }
                }
            }
            if target == *mother {
                for gm in 0..N_GENOTYPES {
                    out[gm] = (0..N_GENOTYPES).map(|gf| msgs[*father][gf] * pair[gm][gf]).sum();
                }
            } else if target == *father {
                for gf in 0..N_GENOTYPES {
                    out[gf] = (0..N_GENOTYPES).map(|gm| msgs[*mother][gm] * pair[gm][gf]).sum();
                }
            } else {
                for gm in 0..N_GENOTYPES {
                    for gf in 0..N_GENOTYPES {
                        let w = msgs[*mother][gm] * msgs[*father][gf] * pair[gm][gf];
                        if w == 0.0 {
                            continue;
                        }
                        for gc in 0..N_GENOTYPES {
                            out[gc] += w * t_at(trans, gc, gm, gf);
                        }
                    }
                }
            }
        }
    }
    out
}

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, Activation, ArchitectureSpec, Geometry, Kind};
use crate::error::{Error, Result};
use crate::metrics::auc;
use crate::seed;

/// Ranges sampled by the random search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub layers: (usize, usize),
    /// Hidden widths for fully-connected networks.
    pub widths: (usize, usize),
    /// Filter counts for pedigree CNNs.
    pub filters: (usize, usize),
    /// Sampled log-uniformly.
    pub learning_rate: (f64, f64),
    pub weight_decay: (f64, f64),
    pub activations: Vec<Activation>,
    pub dropout: (f64, f64),
    /// Fraction of the training data held out for scoring.
    pub holdout: f64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            layers: (1, 3),
            widths: (10, 100),
            filters: (3, 10),
            learning_rate: (1e-4, 1e-2),
            weight_decay: (0.0, 0.01),
            activations: vec![Activation::Relu, Activation::Elu],
            dropout: (0.0, 0.5),
            holdout: 0.1,
        }
    }
}

impl SearchSpace {
    fn check(&self) -> Result<()> {
        let bad = self.activations.is_empty()
            || self.layers.0 == 0
            || self.layers.0 > self.layers.1
            || self.widths.0 == 0
            || self.widths.0 > self.widths.1
            || self.filters.0 == 0
            || self.filters.0 > self.filters.1
            || !(self.learning_rate.0 > 0.0 && self.learning_rate.0 <= self.learning_rate.1)
            || !(self.weight_decay.0 >= 0.0 && self.weight_decay.0 <= self.weight_decay.1)
            || !(self.dropout.0 >= 0.0 && self.dropout.0 <= self.dropout.1 && self.dropout.1 < 1.0)
            || !(self.holdout > 0.0 && self.holdout < 1.0);
        if bad {
            return Err(Error::Config("empty or inverted search space".into()));
        }
        Ok(())
    }

    fn sample(&self, base: &ArchitectureSpec, rng: &mut impl Rng, seed: u64) -> ArchitectureSpec {
        let (lo, hi) = if base.kind == Kind::PedigreeCnn {
            self.filters
        } else {
            self.widths
        };
        let depth = rng.gen_range(self.layers.0..=self.layers.1);
        let hidden = if base.kind == Kind::Logistic {
            Vec::new()
        } else {
            (0..depth).map(|_| rng.gen_range(lo..=hi)).collect()
        };
        let (a, b) = (self.learning_rate.0.ln(), self.learning_rate.1.ln());
        let learning_rate = if a < b { rng.gen_range(a..b) } else { a }.exp();
        let uniform = |rng: &mut dyn rand::RngCore, (lo, hi): (f64, f64)| {
            if lo < hi {
                rng.gen_range(lo..hi)
            } else {
                lo
            }
        };
        let weight_decay = uniform(rng, self.weight_decay);
        let activation = *self.activations.choose(rng).expect("non-empty activations");
        let dropout = uniform(rng, self.dropout);
        ArchitectureSpec {
            hidden,
            activation,
            dropout: if base.kind == Kind::Logistic { 0.0 } else { dropout },
            learning_rate,
            weight_decay,
            seed,
            ..base.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub spec: ArchitectureSpec,
    /// Held-out AUC; `None` when the holdout has a single class.
    pub auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: ArchitectureSpec,
    pub best_auc: Option<f64>,
    pub min_auc: Option<f64>,
    pub max_auc: Option<f64>,
    pub log: Vec<Candidate>,
}

/// Random search over `space`, scoring each candidate by AUC on a held-out
/// fraction of the training data. Candidates are drawn in sequence from
/// `seed` and trained independently.
pub fn random_search<R: AsRef<[f64]> + Sync>(
    space: &SearchSpace,
    base: &ArchitectureSpec,
    geometry: &Geometry,
    xs: &[R],
    ys: &[f64],
    budget: usize,
    seed: u64,
) -> Result<SearchResult> {
    space.check()?;
    if budget == 0 {
        return Err(Error::Config("search budget must be at least 1".into()));
    }
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Config(
            "random search needs at least two labelled examples".into(),
        ));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive_named(seed, "split")));
    let n_hold = ((xs.len() as f64 * space.holdout).round() as usize).clamp(1, xs.len() - 1);
    let (hold, fit) = order.split_at(n_hold);
    let fit_x: Vec<&[f64]> = fit.iter().map(|&i| xs[i].as_ref()).collect();
    let fit_y: Vec<f64> = fit.iter().map(|&i| ys[i]).collect();
    let hold_x: Vec<&[f64]> = hold.iter().map(|&i| xs[i].as_ref()).collect();
    let hold_y: Vec<f64> = hold.iter().map(|&i| ys[i]).collect();

    let mut rng = seed::rng(seed::derive_named(seed, "candidates"));
    let specs: Vec<ArchitectureSpec> = (0..budget)
        .map(|k| space.sample(base, &mut rng, seed::derive(seed, k as u64)))
        .collect();
    let log: Vec<Candidate> = specs
        .into_par_iter()
        .map(|spec| {
            let out = train(&spec, geometry.clone(), &fit_x, &fit_y, None)?;
            let preds = out.network.predict_batch(&hold_x)?;
            Ok(Candidate {
                auc: auc(&preds, &hold_y, None),
                spec,
            })
        })
        .collect::<Result<_>>()?;

    let score = |c: &Candidate| c.auc.unwrap_or(f64::NEG_INFINITY);
    let best = log
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| score(a).total_cmp(&score(b)).then(j.cmp(i)))
        .map(|(_, c)| c.clone())
        .expect("budget >= 1");
    let aucs: Vec<f64> = log.iter().filter_map(|c| c.auc).collect();
    Ok(SearchResult {
        best: best.spec,
        best_auc: best.auc,
        min_auc: aucs.iter().copied().reduce(f64::min),
        max_auc: aucs.iter().copied().reduce(f64::max),
        log,
    })
}

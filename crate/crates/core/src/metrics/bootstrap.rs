use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ap_sorted, ascending, auc_sorted, check_inputs, oe_brier, Metric, MetricSet};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Fraction of replicates in which model `a` beats, ties or loses to `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub a: String,
    pub b: String,
    pub metric: Metric,
    pub win: f64,
    pub tie: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub models: Vec<String>,
    pub replicates: usize,
    /// `intervals[model][metric]` in [`Metric::ALL`] order.
    pub intervals: Vec<[Option<Interval>; 4]>,
    pub comparisons: Vec<PairwiseComparison>,
    /// `values[model][replicate]`.
    #[serde(skip)]
    pub values: Vec<Vec<MetricSet>>,
}

impl BootstrapResult {
    pub fn interval(&self, model: &str, metric: Metric) -> Option<Interval> {
        let k = self.models.iter().position(|m| m == model)?;
        let j = Metric::ALL.iter().position(|&m| m == metric)?;
        self.intervals[k][j]
    }

    pub fn comparison(&self, a: &str, b: &str, metric: Metric) -> Option<&PairwiseComparison> {
        self.comparisons
            .iter()
            .find(|c| c.a == a && c.b == b && c.metric == metric)
    }
}

/// Linear-interpolation percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap over `b` resamples. Every model is scored on the same
/// resample in each replicate, so paired differences are exact.
pub fn bootstrap(
    models: &[(&str, &[f64])],
    labels: &[f64],
    weights: Option<&[f64]>,
    b: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if b == 0 {
        return Err(Error::Config("bootstrap needs at least one replicate".into()));
    }
    for (_, p) in models {
        check_inputs(p, labels, weights)?;
    }
    let n = labels.len();
    let orders: Vec<Vec<usize>> = models.iter().map(|(_, p)| ascending(p)).collect();
    let per_rep: Vec<Vec<MetricSet>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed::derive(seed, r as u64));
            let mut w = vec![0.0; n];
            for _ in 0..n {
                w[rng.gen_range(0..n)] += 1.0;
            }
            if let Some(base) = weights {
                for (wi, bi) in w.iter_mut().zip(base) {
                    *wi *= bi;
                }
            }
            models
                .iter()
                .zip(&orders)
                .map(|((_, p), order)| {
                    let (oe, brier) = oe_brier(p, labels, Some(&w));
                    MetricSet {
                        oe,
                        auc: auc_sorted(order, p, labels, Some(&w)),
                        pr_auc: ap_sorted(order, p, labels, Some(&w)),
                        brier,
                    }
                })
                .collect()
        })
        .collect();
    let values: Vec<Vec<MetricSet>> = (0..models.len())
        .map(|k| per_rep.iter().map(|rep| rep[k]).collect())
        .collect();

    let intervals = values
        .iter()
        .map(|reps| {
            Metric::ALL.map(|m| {
                let mut v: Vec<f64> = reps.iter().filter_map(|s| s.get(m)).collect();
                if v.is_empty() {
                    return None;
                }
                v.sort_by(f64::total_cmp);
                Some(Interval {
                    lo: percentile(&v, 0.025),
                    hi: percentile(&v, 0.975),
                })
            })
        })
        .collect();

    let mut comparisons = Vec::new();
    for (i, (a, _)) in models.iter().enumerate() {
        for (j, (bname, _)) in models.iter().enumerate() {
            if i == j {
                continue;
            }
            for m in Metric::ALL {
                let (mut win, mut tie, mut loss) = (0usize, 0usize, 0usize);
                for r in 0..b {
                    match (values[i][r].get(m), values[j][r].get(m)) {
                        (Some(x), Some(y)) => {
                            let (x, y) = (m.badness(x), m.badness(y));
                            if x < y {
                                win += 1;
                            } else if x > y {
                                loss += 1;
                            } else {
                                tie += 1;
                            }
                        }
                        _ => tie += 1,
                    }
                }
                comparisons.push(PairwiseComparison {
                    a: a.to_string(),
                    b: bname.to_string(),
                    metric: m,
                    win: win as f64 / b as f64,
                    tie: tie as f64 / b as f64,
                    loss: loss as f64 / b as f64,
                });
            }
        }
    }
    Ok(BootstrapResult {
        models: models.iter().map(|(m, _)| m.to_string()).collect(),
        replicates: b,
        intervals,
        comparisons,
        values,
    })
}

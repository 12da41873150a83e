//! Discrimination and calibration metrics for binary risk predictions.
//!
//! All metrics accept optional non-negative case weights (bootstrap counts or
//! inverse-probability-of-censoring weights). Labels are 0/1.

mod bootstrap;
mod ipcw;
mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bootstrap::{bootstrap, BootstrapResult, Interval, PairwiseComparison};
pub use ipcw::{censoring_survival, ipcw_weights};
pub use report::{evaluate, CorrelationKind, EvalReport, ModelReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Oe,
    Auc,
    PrAuc,
    Brier,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Oe, Metric::Auc, Metric::PrAuc, Metric::Brier];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Oe => "oe",
            Metric::Auc => "auc",
            Metric::PrAuc => "pr_auc",
            Metric::Brier => "brier",
        }
    }

    /// Loss-like score used for comparisons: smaller is better.
    pub(crate) fn badness(self, v: f64) -> f64 {
        match self {
            Metric::Oe => (v - 1.0).abs(),
            Metric::Auc | Metric::PrAuc => -v,
            Metric::Brier => v,
        }
    }
}

/// Point estimates. AUC and PR-AUC are `None` without both classes; O/E is
/// `None` when the expected count is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub oe: Option<f64>,
    pub auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub brier: Option<f64>,
}

impl MetricSet {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Oe => self.oe,
            Metric::Auc => self.auc,
            Metric::PrAuc => self.pr_auc,
            Metric::Brier => self.brier,
        }
    }

    pub fn brier_sqrt(&self) -> Option<f64> {
        self.brier.map(f64::sqrt)
    }
}

fn is_case(y: f64) -> bool {
    y > 0.5
}

pub(crate) fn check_inputs(preds: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::Shape {
            expected: preds.len(),
            got: labels.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != preds.len() {
            return Err(Error::Shape {
                expected: preds.len(),
                got: w.len(),
            });
        }
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("weights must be finite and non-negative".into()));
        }
    }
    if preds.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::Config("predictions must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Indices sorted by increasing prediction, ties in index order.
pub(crate) fn ascending(preds: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[a].total_cmp(&preds[b]));
    order
}

#[inline]
fn weight(weights: Option<&[f64]>, i: usize) -> f64 {
    weights.map_or(1.0, |w| w[i])
}

/// Weighted Mann-Whitney AUC over a precomputed ascending order.
pub(crate) fn auc_sorted(order: &[usize], preds: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Option<f64> {
    let mut below_neg = 0.0;
    let mut num = 0.0;
    let (mut total_pos, mut total_neg) = (0.0, 0.0);
    let mut k = 0;
    while k < order.len() {
        let v = preds[order[k]];
        let (mut pos, mut neg) = (0.0, 0.0);
        while k < order.len() && preds[order[k]] == v {
            let i = order[k];
            let w = weight(weights, i);
            if is_case(labels[i]) {
                pos += w;
            } else {
                neg += w;
            }
            k += 1;
        }
        num += pos * below_neg + 0.5 * pos * neg;
        below_neg += neg;
        total_pos += pos;
        total_neg += neg;
    }
    (total_pos > 0.0 && total_neg > 0.0).then(|| num / (total_pos * total_neg))
}

/// Average precision: precision at each distinct threshold weighted by the
/// recall gained there.
pub(crate) fn ap_sorted(order: &[usize], preds: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Option<f64> {
    let total_pos: f64 = order
        .iter()
        .filter(|&&i| is_case(labels[i]))
        .map(|&i| weight(weights, i))
        .sum();
    let total: f64 = order.iter().map(|&i| weight(weights, i)).sum();
    if total_pos <= 0.0 || total_pos >= total {
        return None;
    }
    let (mut tp, mut all, mut ap) = (0.0, 0.0, 0.0);
    let mut k = order.len();
    while k > 0 {
        let v = preds[order[k - 1]];
        let mut gained = 0.0;
        while k > 0 && preds[order[k - 1]] == v {
            let i = order[k - 1];
            let w = weight(weights, i);
            all += w;
            if is_case(labels[i]) {
                gained += w;
            }
            k -= 1;
        }
        tp += gained;
        if gained > 0.0 {
            ap += (gained / total_pos) * (tp / all);
        }
    }
    Some(ap)
}

pub(crate) fn oe_brier(preds: &[f64], labels: &[f64], weights: Option<&[f64]>) -> (Option<f64>, Option<f64>) {
    let (mut o, mut e, mut sq, mut tw) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..preds.len() {
        let w = weight(weights, i);
        let y = f64::from(u8::from(is_case(labels[i])));
        o += w * y;
        e += w * preds[i];
        sq += w * (preds[i] - y) * (preds[i] - y);
        tw += w;
    }
    ((e > 0.0).then(|| o / e), (tw > 0.0).then(|| sq / tw))
}

pub fn auc(preds: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Option<f64> {
    auc_sorted(&ascending(preds), preds, labels, weights)
}

pub fn average_precision(preds: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Option<f64> {
    ap_sorted(&ascending(preds), preds, labels, weights)
}

/// O/E, AUC, PR-AUC and Brier score.
pub fn metrics(preds: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Result<MetricSet> {
    check_inputs(preds, labels, weights)?;
    let order = ascending(preds);
    let (oe, brier) = oe_brier(preds, labels, weights);
    Ok(MetricSet {
        oe,
        auc: auc_sorted(&order, preds, labels, weights),
        pr_auc: ap_sorted(&order, preds, labels, weights),
        brier,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecileRow {
    pub decile: usize,
    pub lower: f64,
    pub upper: f64,
    pub mean_predicted: f64,
    pub observed: f64,
    pub count: usize,
}

/// Calibration by rank deciles of predicted risk (ties keep input order).
pub fn calibration_deciles(preds: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Result<Vec<DecileRow>> {
    check_inputs(preds, labels, weights)?;
    let n = preds.len();
    if n < 10 {
        return Err(Error::Config(format!(
            "calibration needs at least 10 predictions, got {n}"
        )));
    }
    let order = ascending(preds);
    let mut rows = Vec::with_capacity(10);
    for d in 0..10 {
        let group = &order[d * n / 10..(d + 1) * n / 10];
        let (mut wp, mut wy, mut tw) = (0.0, 0.0, 0.0);
        for &i in group {
            let w = weight(weights, i);
            wp += w * preds[i];
            wy += w * f64::from(u8::from(is_case(labels[i])));
            tw += w;
        }
        let safe = |v: f64| if tw > 0.0 { v / tw } else { f64::NAN };
        rows.push(DecileRow {
            decile: d + 1,
            lower: preds[group[0]],
            upper: preds[*group.last().expect("non-empty decile")],
            mean_predicted: safe(wp),
            observed: safe(wy),
            count: group.len(),
        });
    }
    Ok(rows)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Ranks starting at 1, ties sharing their average rank.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let order = ascending(v);
    let mut ranks = vec![0.0; v.len()];
    let mut k = 0;
    while k < order.len() {
        let mut j = k;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[k]] {
            j += 1;
        }
        let r = (k + j) as f64 / 2.0 + 1.0;
        for &i in &order[k..=j] {
            ranks[i] = r;
        }
        k = j + 1;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    /// Exhaustive pair counting.
    fn auc_pairs(p: &[f64], y: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..p.len() {
            for j in 0..p.len() {
                if y[i] == 1.0 && y[j] == 0.0 {
                    den += 1.0;
                    num += if p[i] > p[j] {
                        1.0
                    } else if p[i] == p[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_examples() {
        let p = [0.1, 0.4, 0.35, 0.8];
        let y = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(auc(&p, &y, None), Some(0.75));
        assert_eq!(auc(&[0.3; 6], &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0], None), Some(0.5));
        assert_eq!(auc(&p, &[0.0; 4], None), None);
        let mut rng = seed::rng(3);
        let p: Vec<f64> = (0..60).map(|_| (rng.gen_range(0..10) as f64) / 10.0).collect();
        let y: Vec<f64> = (0..60).map(|_| f64::from(u8::from(rng.gen_bool(0.4)))).collect();
        assert!((auc(&p, &y, None).unwrap() - auc_pairs(&p, &y)).abs() < 1e-12);
    }

    #[test]
    fn weights_act_as_replication() {
        let p = [0.2, 0.5, 0.5, 0.9, 0.1];
        let y = [0.0, 1.0, 0.0, 1.0, 1.0];
        let w = [2.0, 1.0, 3.0, 0.0, 1.0];
        let mut rp = Vec::new();
        let mut ry = Vec::new();
        for i in 0..5 {
            for _ in 0..w[i] as usize {
                rp.push(p[i]);
                ry.push(y[i]);
            }
        }
        let a = metrics(&p, &y, Some(&w)).unwrap();
        let b = metrics(&rp, &ry, None).unwrap();
        for m in Metric::ALL {
            assert!((a.get(m).unwrap() - b.get(m).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn average_precision_hand_value() {
        // ranked: 0.9(1) 0.8(0) 0.7(1) 0.2(0): AP = 0.5*1 + 0.5*(2/3)
        let ap = average_precision(&[0.2, 0.7, 0.8, 0.9], &[0.0, 1.0, 0.0, 1.0], None).unwrap();
        assert!((ap - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn oe_and_brier() {
        let m = metrics(&[0.5, 0.25, 0.25], &[1.0, 0.0, 1.0], None).unwrap();
        assert_eq!(m.oe, Some(2.0));
        assert!((m.brier.unwrap() - (0.25 + 0.0625 + 0.5625) / 3.0).abs() < 1e-15);
        assert!(metrics(&[1.5], &[1.0], None).is_err());
    }

    #[test]
    fn deciles() {
        let p: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let rows = calibration_deciles(
            &p,
            &p.iter().map(|&v| f64::from(u8::from(v >= 0.5))).collect::<Vec<_>>(),
            None,
        )
        .unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!(rows[0].count, 10);
        assert_eq!(rows[4].observed, 0.0);
        assert_eq!(rows[5].observed, 1.0);
        let flat = calibration_deciles(&[0.2; 20], &[0.0; 20], None).unwrap();
        assert!(flat.iter().all(|r| r.mean_predicted == 0.2 && r.count == 2));
        assert!(calibration_deciles(&[0.1; 9], &[0.0; 9], None).is_err());
    }

    #[test]
    fn correlations() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&a, &[2.0, 4.0, 6.0, 8.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&a, &[1.0, 8.0, 27.0, 64.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(pearson(&a, &[1.0; 4]), None);
    }
}

use serde::{Deserialize, Serialize};

use super::{
    bootstrap, calibration_deciles, metrics, pearson, spearman, DecileRow, Interval, Metric, MetricSet,
    PairwiseComparison,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    #[default]
    Pearson,
    Spearman,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub point: MetricSet,
    pub brier_sqrt: Option<f64>,
    pub oe_ci: Option<Interval>,
    pub auc_ci: Option<Interval>,
    pub pr_auc_ci: Option<Interval>,
    /// Interval for the square-rooted Brier score.
    pub brier_sqrt_ci: Option<Interval>,
    /// Correlation with the reference model's predictions.
    pub rho: Option<f64>,
    pub deciles: Vec<DecileRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub cases: f64,
    pub replicates: usize,
    pub seed: u64,
    pub reference: Option<String>,
    pub correlation: CorrelationKind,
    pub models: Vec<ModelReport>,
    pub comparisons: Vec<PairwiseComparison>,
    pub notes: Vec<String>,
}

pub const OE_COMPARISON_NOTE: &str = "O/E comparisons count a win when |O/E - 1| is strictly smaller";

/// Point estimates, percentile intervals, pairwise win proportions, decile
/// calibration and correlation with `reference` for each named model.
pub fn evaluate(
    models: &[(&str, &[f64])],
    labels: &[f64],
    weights: Option<&[f64]>,
    reference: Option<&str>,
    correlation: CorrelationKind,
    replicates: usize,
    seed: u64,
) -> Result<EvalReport> {
    if models.is_empty() {
        return Err(Error::Config("no models to evaluate".into()));
    }
    let reference_preds = match reference {
        Some(r) => Some(
            models
                .iter()
                .find(|(m, _)| *m == r)
                .map(|(_, p)| *p)
                .ok_or_else(|| Error::Config(format!("reference model {r} not among evaluated models")))?,
        ),
        None => None,
    };
    let boot = bootstrap(models, labels, weights, replicates, seed)?;
    let mut out = Vec::with_capacity(models.len());
    for (k, (name, preds)) in models.iter().enumerate() {
        let point = metrics(preds, labels, weights)?;
        let deciles = if preds.len() >= 10 {
            calibration_deciles(preds, labels, weights)?
        } else {
            Vec::new()
        };
        let rho = reference_preds.and_then(|r| match correlation {
            CorrelationKind::Pearson => pearson(preds, r),
            CorrelationKind::Spearman => spearman(preds, r),
        });
        let ci = |m| boot.intervals[k][Metric::ALL.iter().position(|&x| x == m).expect("metric")];
        out.push(ModelReport {
            name: name.to_string(),
            point,
            brier_sqrt: point.brier_sqrt(),
            oe_ci: ci(Metric::Oe),
            auc_ci: ci(Metric::Auc),
            pr_auc_ci: ci(Metric::PrAuc),
            brier_sqrt_ci: ci(Metric::Brier).map(|i| Interval {
                lo: i.lo.sqrt(),
                hi: i.hi.sqrt(),
            }),
            rho,
            deciles,
        });
    }
    let cases = labels
        .iter()
        .enumerate()
        .filter(|(_, &y)| y > 0.5)
        .map(|(i, _)| weights.map_or(1.0, |w| w[i]))
        .fold(0.0, |a, b| a + b);
    Ok(EvalReport {
        n: labels.len(),
        cases,
        replicates,
        seed,
        reference: reference.map(str::to_string),
        correlation,
        models: out,
        comparisons: boot.comparisons,
        notes: vec![OE_COMPARISON_NOTE.to_string()],
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl EvalReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn win(&self, a: &str, b: &str, metric: Metric) -> Option<f64> {
        self.comparisons
            .iter()
            .find(|c| c.a == a && c.b == b && c.metric == metric)
            .map(|c| c.win)
    }

    /// Performance block: one row per model, empty cells for undefined values.
    pub fn performance_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "model",
            "oe",
            "oe_lo",
            "oe_hi",
            "auc",
            "auc_lo",
            "auc_hi",
            "pr_auc",
            "pr_auc_lo",
            "pr_auc_hi",
            "brier_sqrt",
            "brier_sqrt_lo",
            "brier_sqrt_hi",
            "rho",
        ])?;
        for m in &self.models {
            let lo = |i: Option<Interval>| cell(i.map(|i| i.lo));
            let hi = |i: Option<Interval>| cell(i.map(|i| i.hi));
            w.write_record([
                m.name.clone(),
                cell(m.point.oe),
                lo(m.oe_ci),
                hi(m.oe_ci),
                cell(m.point.auc),
                lo(m.auc_ci),
                hi(m.auc_ci),
                cell(m.point.pr_auc),
                lo(m.pr_auc_ci),
                hi(m.pr_auc_ci),
                cell(m.brier_sqrt),
                lo(m.brier_sqrt_ci),
                hi(m.brier_sqrt_ci),
                cell(m.rho),
            ])?;
        }
        finish(w)
    }

    /// Comparisons block: win, tie and loss fractions per ordered pair.
    pub fn comparisons_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["a", "b", "metric", "win", "tie", "loss"])?;
        for c in &self.comparisons {
            w.write_record([
                c.a.clone(),
                c.b.clone(),
                c.metric.name().to_string(),
                c.win.to_string(),
                c.tie.to_string(),
                c.loss.to_string(),
            ])?;
        }
        finish(w)
    }

    pub fn deciles_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "model",
            "decile",
            "lower",
            "upper",
            "mean_predicted",
            "observed",
            "count",
        ])?;
        for m in &self.models {
            for d in &m.deciles {
                w.write_record([
                    m.name.clone(),
                    d.decile.to_string(),
                    d.lower.to_string(),
                    d.upper.to_string(),
                    d.mean_predicted.to_string(),
                    d.observed.to_string(),
                    d.count.to_string(),
                ])?;
            }
        }
        finish(w)
    }
}

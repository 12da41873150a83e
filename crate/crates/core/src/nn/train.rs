use rand::seq::SliceRandom;
use rand::Rng;

use super::{Geometry, Network, Pass};
use crate::error::{Error, Result};
use crate::seed;

use super::ArchitectureSpec;

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub network: Network,
    /// Mean weighted data loss per epoch.
    pub loss_trace: Vec<f64>,
}

fn check_data<R: AsRef<[f64]>>(net: &Network, xs: &[R], ys: &[f64], ws: Option<&[f64]>) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Shape {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if let Some(w) = ws {
        if w.len() != xs.len() {
            return Err(Error::Shape {
                expected: xs.len(),
                got: w.len(),
            });
        }
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("sample weights must be finite and non-negative".into()));
        }
    }
    if ys.iter().any(|&y| !(0.0..=1.0).contains(&y)) {
        return Err(Error::Config("labels must lie in [0, 1]".into()));
    }
    for x in xs {
        net.check_input(x.as_ref())?;
    }
    Ok(())
}

/// Weighted loss of a batch, accumulating `sum_i w_i dL_i / B` into `grad`.
fn batch_loss<R: AsRef<[f64]>>(
    net: &Network,
    params: &[f64],
    xs: &[R],
    ys: &[f64],
    ws: Option<&[f64]>,
    idx: &[usize],
    pass: &mut Pass<'_>,
    grad: &mut [f64],
) -> f64 {
    let scale = 1.0 / idx.len() as f64;
    let loss_fn = net.spec.loss;
    let mut total = 0.0;
    for &i in idx {
        let w = ws.map_or(1.0, |w| w[i]) * scale;
        if w == 0.0 {
            continue;
        }
        let y = ys[i];
        let mut loss = 0.0;
        let mut d = |z: f64| {
            let (l, dl) = loss_fn.eval(z, y);
            loss = l;
            w * dl
        };
        net.run(params, xs[i].as_ref(), pass, Some((&mut d, grad, None)));
        total += w * loss;
    }
    total
}

/// Minibatch Adam with coupled L2 weight decay and inverted dropout after
/// the first hidden layer. Deterministic given `spec.seed`.
pub fn train<R: AsRef<[f64]>>(
    spec: &ArchitectureSpec,
    geometry: Geometry,
    xs: &[R],
    ys: &[f64],
    ws: Option<&[f64]>,
) -> Result<TrainOutput> {
    let mut net = Network::init(spec.clone(), geometry)?;
    check_data(&net, xs, ys, ws)?;
    if xs.is_empty() {
        return Err(Error::Config("no training examples".into()));
    }
    let n = net.n_params();
    let decay_mask = net.layout.weight_mask();
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut step = 0i32;
    let mut shuffle_rng = seed::rng(seed::derive(spec.seed, 1));
    let mut dropout_rng = seed::rng(seed::derive(spec.seed, 2));
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut trace = Vec::with_capacity(spec.epochs);
    let mut params = std::mem::take(&mut net.params);

    for epoch in 0..spec.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for (bi, idx) in order.chunks(spec.batch_size).enumerate() {
            grad.fill(0.0);
            let mut pass = Pass {
                dropout: (spec.dropout > 0.0).then_some((spec.dropout, &mut dropout_rng)),
            };
            let loss = batch_loss(&net, &params, xs, ys, ws, idx, &mut pass, &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: bi });
            }
            epoch_loss += loss * idx.len() as f64;
            step += 1;
            let c1 = 1.0 - b1.powi(step);
            let c2 = 1.0 - b2.powi(step);
            for k in 0..n {
                let g = grad[k]
                    + if decay_mask[k] {
                        spec.weight_decay * params[k]
                    } else {
                        0.0
                    };
                m[k] = b1 * m[k] + (1.0 - b1) * g;
                v[k] = b2 * v[k] + (1.0 - b2) * g * g;
                params[k] -= spec.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        }
        trace.push(epoch_loss / xs.len() as f64);
    }
    net.params = params;
    Ok(TrainOutput {
        network: net,
        loss_trace: trace,
    })
}

/// Training objective without dropout: mean weighted loss plus
/// `weight_decay / 2` times the squared weight norm.
fn objective<R: AsRef<[f64]>>(net: &Network, params: &[f64], xs: &[R], ys: &[f64], grad: &mut [f64]) -> f64 {
    let idx: Vec<usize> = (0..xs.len()).collect();
    let mut pass = Pass { dropout: None };
    let mut loss = batch_loss(net, params, xs, ys, None, &idx, &mut pass, grad);
    let lambda = net.spec.weight_decay;
    if lambda > 0.0 {
        for b in net.layout.blocks() {
            for k in b.weight_range() {
                loss += 0.5 * lambda * params[k] * params[k];
                grad[k] += lambda * params[k];
            }
        }
    }
    loss
}

/// Largest relative error between analytic and central-difference gradients
/// (step 1e-5) over `checks` randomly chosen parameters. The relative error
/// is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check<R: AsRef<[f64]>>(net: &Network, xs: &[R], ys: &[f64], checks: usize, seed: u64) -> Result<f64> {
    check_data(net, xs, ys, None)?;
    let n = net.n_params();
    let mut analytic = vec![0.0; n];
    objective(net, &net.params, xs, ys, &mut analytic);
    let mut rng = seed::rng(seed);
    let picks: Vec<usize> = if checks >= n {
        (0..n).collect()
    } else {
        (0..checks).map(|_| rng.gen_range(0..n)).collect()
    };
    let h = 1e-5;
    let mut scratch = vec![0.0; n];
    let mut params = net.params.clone();
    let mut worst = 0.0f64;
    for k in picks {
        let orig = params[k];
        params[k] = orig + h;
        let up = objective(net, &params, xs, ys, &mut scratch);
        params[k] = orig - h;
        let down = objective(net, &params, xs, ys, &mut scratch);
        params[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

//! Fully-connected forward and backward pass.

use rand::Rng;

use super::{Network, Pass};

pub(super) fn run(
    net: &Network,
    params: &[f64],
    x: &[f64],
    pass: &mut Pass<'_>,
    backward: Option<(&mut dyn FnMut(f64) -> f64, &mut [f64], Option<&mut [f64]>)>,
) -> f64 {
    let layout = &net.layout;
    let act = net.spec.activation;
    let depth = layout.hidden.len();
    let mut zs: Vec<Vec<f64>> = Vec::with_capacity(depth);
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(depth);
    let mut mask: Option<Vec<f64>> = None;

    for (k, blk) in layout.hidden.iter().enumerate() {
        let input: &[f64] = if k == 0 { x } else { &acts[k - 1] };
        let mut z = params[blk.b..blk.b + blk.rows].to_vec();
        for (i, zi) in z.iter_mut().enumerate() {
            let row = &params[blk.w + i * blk.cols..blk.w + (i + 1) * blk.cols];
            *zi += dot(row, input);
        }
        let mut a: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
        if k == 0 {
            if let Some((rate, rng)) = pass.dropout.as_mut() {
                let keep = 1.0 - *rate;
                let m: Vec<f64> = (0..a.len())
                    .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
                    .collect();
                for (ai, mi) in a.iter_mut().zip(&m) {
                    *ai *= mi;
                }
                mask = Some(m);
            }
        }
        zs.push(z);
        acts.push(a);
    }

    let out = layout.out;
    let last: &[f64] = if depth == 0 { x } else { &acts[depth - 1] };
    let w_out = &params[out.w..out.w + out.cols];
    let logit = params[out.b] + dot(w_out, last);

    let Some((d_out, grad, input_grad)) = backward else {
        return logit;
    };
    let d = d_out(logit);
    grad[out.b] += d;
    for (g, &a) in grad[out.w..out.w + out.cols].iter_mut().zip(last) {
        *g += d * a;
    }
    let mut da: Vec<f64> = w_out.iter().map(|&w| d * w).collect();
    for k in (0..depth).rev() {
        let blk = layout.hidden[k];
        let input: &[f64] = if k == 0 { x } else { &acts[k - 1] };
        let dz: Vec<f64> = (0..blk.rows)
            .map(|i| {
                let z = zs[k][i];
                let m = if k == 0 {
                    mask.as_ref().map_or(1.0, |m| m[i])
                } else {
                    1.0
                };
                da[i] * m * act.derivative(z, act.apply(z))
            })
            .collect();
        let need_prev = k > 0 || input_grad.is_some();
        let mut prev = if need_prev { vec![0.0; blk.cols] } else { Vec::new() };
        for (i, &dzi) in dz.iter().enumerate() {
            if dzi == 0.0 {
                continue;
            }
            grad[blk.b + i] += dzi;
            let row = blk.w + i * blk.cols;
            for (g, &inp) in grad[row..row + blk.cols].iter_mut().zip(input) {
                *g += dzi * inp;
            }
            if need_prev {
                for (p, &w) in prev.iter_mut().zip(&params[row..row + blk.cols]) {
                    *p += dzi * w;
                }
            }
        }
        da = prev;
    }
    if let Some(gx) = input_grad {
        for (g, v) in gx.iter_mut().zip(&da) {
            *g += v;
        }
    }
    logit
}

#[inline]
pub(super) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

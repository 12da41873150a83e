//! Pedigree-convolutional forward and backward pass.
//!
//! Layer `l` applies the same filters to the concatenated layer `l-1`
//! activations of every slot's neighborhood; padding positions read zeros.
//! The output unit reads slot 0 only, so each layer is evaluated just on the
//! slots inside the counselee's receptive field.

use rand::Rng;

use super::dense::dot;
use super::{Geometry, Network, Pass};
use crate::encoder::NeighborhoodMap;

/// `sets[l]` lists the slots whose layer-`l` activations reach the output,
/// for `l = 0..=depth`.
pub(super) fn receptive_sets(map: &NeighborhoodMap, depth: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); depth + 1];
    sets[depth] = vec![0];
    for l in (0..depth).rev() {
        let mut seen = vec![false; map.slots];
        for &r in &sets[l + 1] {
            for &s in map.of(r) {
                if s != map.sentinel() {
                    seen[s] = true;
                }
            }
        }
        sets[l] = (0..map.slots).filter(|&s| seen[s]).collect();
    }
    sets
}

fn gather(buf: &mut [f64], neighbors: &[usize], sentinel: usize, prev: &[f64], width: usize) {
    for (p, &s) in neighbors.iter().enumerate() {
        let dst = &mut buf[p * width..(p + 1) * width];
        if s == sentinel {
            dst.fill(0.0);
        } else {
            dst.copy_from_slice(&prev[s * width..(s + 1) * width]);
        }
    }
}

pub(super) fn run(
    net: &Network,
    params: &[f64],
    x: &[f64],
    pass: &mut Pass<'_>,
    backward: Option<(&mut dyn FnMut(f64) -> f64, &mut [f64], Option<&mut [f64]>)>,
) -> f64 {
    let Geometry::Pedigree {
        slots, features, map, ..
    } = &net.geometry
    else {
        unreachable!("conv::run called on a dense geometry")
    };
    let (slots, features) = (*slots, *features);
    let layout = &net.layout;
    let act = net.spec.activation;
    let depth = layout.hidden.len();
    let sentinel = map.sentinel();
    let widths: Vec<usize> = std::iter::once(features)
        .chain(layout.hidden.iter().map(|b| b.rows))
        .collect();

    // acts[l], zs[l] for l = 1..=depth; index 0 unused
    let mut acts: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    let mut zs: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    let mut mask: Vec<f64> = Vec::new();
    let mut buf = Vec::new();
    for l in 1..=depth {
        let blk = layout.hidden[l - 1];
        let (m, mp) = (widths[l], widths[l - 1]);
        let mut a = vec![0.0; slots * m];
        let mut z = vec![0.0; slots * m];
        buf.resize(map.u * mp, 0.0);
        let dropout = l == 1 && pass.dropout.is_some();
        if dropout {
            mask = vec![1.0; slots * m];
        }
        for &r in &net.receptive[l] {
            let prev: &[f64] = if l == 1 { &x[..slots * features] } else { &acts[l - 1] };
            gather(&mut buf, map.of(r), sentinel, prev, mp);
            for i in 0..m {
                let row = &params[blk.w + i * blk.cols..blk.w + (i + 1) * blk.cols];
                let zi = params[blk.b + i] + dot(row, &buf);
                z[r * m + i] = zi;
                a[r * m + i] = act.apply(zi);
            }
            if dropout {
                let (rate, rng) = pass.dropout.as_mut().expect("dropout state");
                let keep = 1.0 - *rate;
                for i in 0..m {
                    let k = if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 };
                    mask[r * m + i] = k;
                    a[r * m + i] *= k;
                }
            }
        }
        acts[l] = a;
        zs[l] = z;
    }

    let out = layout.out;
    let top = widths[depth];
    let extras = &x[slots * features..];
    let w_out = &params[out.w..out.w + out.cols];
    let counselee: &[f64] = if depth == 0 {
        &x[..features]
    } else {
        &acts[depth][..top]
    };
    let logit = params[out.b] + dot(&w_out[..top], counselee) + dot(&w_out[top..], extras);

    let Some((d_out, grad, mut input_grad)) = backward else {
        return logit;
    };
    let d = d_out(logit);
    grad[out.b] += d;
    for (i, &a) in counselee.iter().enumerate() {
        grad[out.w + i] += d * a;
    }
    for (e, &v) in extras.iter().enumerate() {
        grad[out.w + top + e] += d * v;
    }
    if let Some(gx) = input_grad.as_deref_mut() {
        for (e, g) in gx[slots * features..].iter_mut().enumerate() {
            *g += d * w_out[top + e];
        }
    }
    let mut da = vec![0.0; slots * top];
    for i in 0..top {
        da[i] = d * w_out[i];
    }
    let mut dz = Vec::new();
    for l in (1..=depth).rev() {
        let blk = layout.hidden[l - 1];
        let (m, mp) = (widths[l], widths[l - 1]);
        let need_prev = l > 1 || input_grad.is_some();
        let mut da_prev = if need_prev { vec![0.0; slots * mp] } else { Vec::new() };
        buf.resize(map.u * mp, 0.0);
        dz.resize(m, 0.0);
        for &r in &net.receptive[l] {
            let mut any = false;
            for i in 0..m {
                let k = r * m + i;
                let z = zs[l][k];
                let keep = if l == 1 && !mask.is_empty() { mask[k] } else { 1.0 };
                dz[i] = da[k] * keep * act.derivative(z, act.apply(z));
                any |= dz[i] != 0.0;
            }
            if !any {
                continue;
            }
            let prev: &[f64] = if l == 1 { &x[..slots * features] } else { &acts[l - 1] };
            gather(&mut buf, map.of(r), sentinel, prev, mp);
            for i in 0..m {
                let dzi = dz[i];
                if dzi == 0.0 {
                    continue;
                }
                grad[blk.b + i] += dzi;
                let row = blk.w + i * blk.cols;
                for (g, &v) in grad[row..row + blk.cols].iter_mut().zip(&buf) {
                    *g += dzi * v;
                }
            }
            if need_prev {
                for (p, &s) in map.of(r).iter().enumerate() {
                    if s == sentinel {
                        continue;
                    }
                    for c in 0..mp {
                        let col = p * mp + c;
                        let mut acc = 0.0;
                        for i in 0..m {
                            acc += dz[i] * params[blk.w + i * blk.cols + col];
                        }
                        da_prev[s * mp + c] += acc;
                    }
                }
            }
        }
        da = da_prev;
    }
    if let Some(gx) = input_grad {
        if depth == 0 {
            for (g, v) in gx[..features].iter_mut().zip(&w_out[..top]) {
                *g += d * v;
            }
        } else {
            for (g, v) in gx[..slots * features].iter_mut().zip(&da) {
                *g += v;
            }
        }
    }
    logit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{build_neighborhoods, NeighborhoodSizes, ReferenceStructure, FEATURES};
    use crate::nn::{ArchitectureSpec, Network};
    use crate::pedigree::RelativeType;

    fn setup(hidden: Vec<usize>) -> (ReferenceStructure, Network) {
        let r = ReferenceStructure::default_simulation();
        let map = build_neighborhoods(&r, NeighborhoodSizes::default(), 0);
        let geometry = Geometry::Pedigree {
            slots: r.size(),
            features: FEATURES,
            extras: 1,
            map,
        };
        let spec = ArchitectureSpec {
            hidden,
            seed: 4,
            ..ArchitectureSpec::cnn()
        };
        (r, Network::init(spec, geometry).unwrap())
    }

    /// Full evaluation of every slot at every layer, ignoring receptive sets.
    fn naive_predict(net: &Network, x: &[f64]) -> f64 {
        let Geometry::Pedigree {
            slots, features, map, ..
        } = &net.geometry
        else {
            unreachable!()
        };
        let mut prev: Vec<f64> = x[..slots * features].to_vec();
        let mut width = *features;
        for blk in &net.layout.hidden {
            let mut next = vec![0.0; slots * blk.rows];
            for r in 0..*slots {
                let mut input = Vec::new();
                for &s in map.of(r) {
                    if s == map.sentinel() {
                        input.extend(std::iter::repeat(0.0).take(width));
                    } else {
                        input.extend_from_slice(&prev[s * width..(s + 1) * width]);
                    }
                }
                for i in 0..blk.rows {
                    let w = &net.params[blk.w + i * blk.cols..blk.w + (i + 1) * blk.cols];
                    next[r * blk.rows + i] = net.spec.activation.apply(net.params[blk.b + i] + dot(w, &input));
                }
            }
            prev = next;
            width = blk.rows;
        }
        let out = net.layout.out;
        let mut z = net.params[out.b];
        for i in 0..width {
            z += net.params[out.w + i] * prev[i];
        }
        z += net.params[out.w + width] * x[slots * features];
        crate::nn::sigmoid(z)
    }

    #[test]
    fn receptive_evaluation_matches_full_evaluation() {
        let (_, net) = setup(vec![10, 5, 4]);
        let x: Vec<f64> = (0..183).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        assert!((net.predict(&x).unwrap() - naive_predict(&net, &x)).abs() < 1e-14);
    }

    #[test]
    fn consistent_slot_permutation_is_invisible() {
        let (r, net) = setup(vec![10, 5]);
        let mut x: Vec<f64> = (0..183).map(|i| ((i * 13) % 7) as f64 / 7.0).collect();
        let before = net.predict(&x).unwrap();
        let bro: Vec<usize> = r.slots_of(RelativeType::Brother).collect();
        let (a, b) = (bro[0], bro[1]);
        for c in 0..FEATURES {
            x.swap(a * FEATURES + c, b * FEATURES + c);
        }
        let Geometry::Pedigree {
            slots,
            features,
            extras,
            map,
        } = net.geometry.clone()
        else {
            unreachable!()
        };
        let swap = |s: usize| {
            if s == a {
                b
            } else if s == b {
                a
            } else {
                s
            }
        };
        let mut index = map.index.clone();
        for slot in 0..slots {
            let src = swap(slot);
            for p in 0..map.u {
                index[slot * map.u + p] = swap(map.index[src * map.u + p]);
            }
        }
        let permuted = Network::from_parts(
            net.spec.clone(),
            Geometry::Pedigree {
                slots,
                features,
                extras,
                map: NeighborhoodMap { index, ..map },
            },
            net.params.clone(),
        )
        .unwrap();
        assert_eq!(permuted.predict(&x).unwrap(), before);
    }

    #[test]
    fn receptive_field_by_depth() {
        let (r, one) = setup(vec![10]);
        let (_, two) = setup(vec![10, 5]);
        let x: Vec<f64> = (0..183).map(|i| 0.1 + ((i * 7) % 5) as f64 / 5.0).collect();
        let g1 = one.input_gradient(&x).unwrap();
        let g2 = two.input_gradient(&x).unwrap();
        let second: Vec<usize> = (0..r.size()).filter(|&s| r.slot_type(s).degree() == Some(2)).collect();
        for &s in &second {
            for c in 0..FEATURES {
                assert_eq!(g1[s * FEATURES + c], 0.0);
            }
        }
        assert!(second
            .iter()
            .any(|&s| (0..FEATURES).any(|c| g2[s * FEATURES + c] != 0.0)));
    }
}

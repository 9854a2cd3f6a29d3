//! Two-layer perceptron head: affine → ReLU → dropout → affine.

use rand::Rng;

use super::params::MlpParams;

/// Head input: a dense prefix followed by sparse entries whose indices are
/// absolute columns (all ≥ `dense.len()`).
#[derive(Debug, Clone, Default)]
pub struct HeadInput {
    pub dense: Vec<f64>,
    pub sparse: Vec<(usize, f64)>,
}

impl HeadInput {
    pub fn dense(dense: Vec<f64>) -> Self {
        Self {
            dense,
            sparse: Vec::new(),
        }
    }
}

/// Inverted-dropout mask: each unit is kept with probability `1 - p` and
/// scaled by `1 / (1 - p)`. `None` when `p == 0`, in which case no random
/// numbers are drawn.
pub fn sample_dropout_mask<R: Rng>(size: usize, p: f64, rng: &mut R) -> Option<Vec<f64>> {
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some(
        (0..size)
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect(),
    )
}

#[derive(Debug, Clone)]
pub(crate) struct MlpCache {
    pub pre: Vec<f64>,
    /// Post-ReLU, post-dropout activations.
    pub act: Vec<f64>,
}

pub(crate) fn mlp_forward(
    p: &MlpParams,
    x: &HeadInput,
    mask: Option<&[f64]>,
) -> (Vec<f64>, MlpCache) {
    let cols = p.w1.cols;
    let mut pre = p.b1.data.clone();
    for (r, z) in pre.iter_mut().enumerate() {
        let row = &p.w1.data[r * cols..(r + 1) * cols];
        *z += crate::tensor::dot(&row[..x.dense.len()], &x.dense);
        for &(c, v) in &x.sparse {
            *z += row[c] * v;
        }
    }
    let act: Vec<f64> = pre
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            let a = z.max(0.0);
            mask.map_or(a, |m| a * m[k])
        })
        .collect();
    let mut logits = p.b2.data.clone();
    p.w2.matvec_acc(&act, &mut logits);
    (logits, MlpCache { pre, act })
}

/// Accumulate head gradients for `d_logits` and return the gradient with
/// respect to the first `d_input_len` dense input columns.
pub(crate) fn mlp_backward(
    p: &MlpParams,
    grads: &mut MlpParams,
    x: &HeadInput,
    mask: Option<&[f64]>,
    cache: &MlpCache,
    d_logits: &[f64],
    d_input_len: usize,
) -> Vec<f64> {
    grads.w2.outer_acc(d_logits, &cache.act);
    for (b, d) in grads.b2.data.iter_mut().zip(d_logits) {
        *b += d;
    }
    let mut d_act = vec![0.0; cache.act.len()];
    p.w2.matvec_t_acc(d_logits, &mut d_act);
    let d_pre: Vec<f64> = d_act
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            if cache.pre[k] > 0.0 {
                mask.map_or(d, |m| d * m[k])
            } else {
                0.0
            }
        })
        .collect();
    let cols = p.w1.cols;
    let mut d_input = vec![0.0; d_input_len];
    for (r, &d) in d_pre.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let g_row = &mut grads.w1.data[r * cols..(r + 1) * cols];
        for (g, &v) in g_row.iter_mut().zip(&x.dense) {
            *g += d * v;
        }
        for &(c, v) in &x.sparse {
            g_row[c] += d * v;
        }
        grads.b1.data[r] += d;
        let row = &p.w1.data[r * cols..r * cols + d_input_len];
        for (o, &w) in d_input.iter_mut().zip(row) {
            *o += d * w;
        }
    }
    d_input
}

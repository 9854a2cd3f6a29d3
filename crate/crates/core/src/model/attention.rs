//! Additive attention pooling with a learned context vector:
//! `e_t = tanh(W·h_t + b)·u`, `α = softmax(e)`, `s = Σ α_t h_t`.

use crate::tensor::{axpy, dot, softmax, Tensor};

#[derive(Debug, Clone)]
pub(crate) struct AttentionCache {
    /// `tanh(W·h_t + b)` per position.
    pub keys: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub output: Vec<f64>,
}

pub(crate) fn attention_forward(
    hidden: &[Vec<f64>],
    w: &Tensor,
    b: &Tensor,
    u: &Tensor,
) -> AttentionCache {
    let keys: Vec<Vec<f64>> = hidden
        .iter()
        .map(|h| {
            let mut z = b.data.clone();
            w.matvec_acc(h, &mut z);
            z.iter_mut().for_each(|v| *v = v.tanh());
            z
        })
        .collect();
    let scores: Vec<f64> = keys.iter().map(|k| dot(k, &u.data)).collect();
    let alpha = softmax(&scores);
    let mut output = vec![0.0; hidden.first().map_or(0, Vec::len)];
    for (a, h) in alpha.iter().zip(hidden) {
        axpy(*a, h, &mut output);
    }
    AttentionCache {
        keys,
        alpha,
        output,
    }
}

/// Attention weights over `hidden`.
pub fn attention_weights(hidden: &[Vec<f64>], w: &Tensor, b: &Tensor, u: &Tensor) -> Vec<f64> {
    attention_forward(hidden, w, b, u).alpha
}

/// Sentence vector: the attention-weighted sum of `hidden`.
pub fn attention(hidden: &[Vec<f64>], w: &Tensor, b: &Tensor, u: &Tensor) -> Vec<f64> {
    attention_forward(hidden, w, b, u).output
}

pub(crate) struct AttentionGrads<'a> {
    pub w: &'a mut Tensor,
    pub b: &'a mut Tensor,
    pub u: &'a mut Tensor,
}

/// Given `d_out = ∂L/∂s`, accumulate parameter gradients and return
/// `∂L/∂h_t` for every position.
pub(crate) fn attention_backward(
    cache: &AttentionCache,
    hidden: &[Vec<f64>],
    w: &Tensor,
    u: &Tensor,
    d_out: &[f64],
    grads: AttentionGrads<'_>,
) -> Vec<Vec<f64>> {
    let d_alpha: Vec<f64> = hidden.iter().map(|h| dot(d_out, h)).collect();
    let mean: f64 = cache.alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
    let mut d_hidden = Vec::with_capacity(hidden.len());
    for (t, h) in hidden.iter().enumerate() {
        let alpha = cache.alpha[t];
        let de = alpha * (d_alpha[t] - mean);
        let key = &cache.keys[t];
        axpy(de, key, &mut grads.u.data);
        let dz: Vec<f64> = key
            .iter()
            .zip(&u.data)
            .map(|(k, uw)| de * uw * (1.0 - k * k))
            .collect();
        grads.w.outer_acc(&dz, h);
        for (b, d) in grads.b.data.iter_mut().zip(&dz) {
            *b += d;
        }
        let mut dh: Vec<f64> = d_out.iter().map(|d| alpha * d).collect();
        w.matvec_t_acc(&dz, &mut dh);
        d_hidden.push(dh);
    }
    d_hidden
}

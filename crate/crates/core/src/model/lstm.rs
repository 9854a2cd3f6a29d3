//! Bidirectional LSTM forward and backward passes.

use super::params::LstmParams;
use crate::tensor::{sigmoid, Tensor};
use crate::{Error, Result};

/// One LSTM step:
/// `i, f, o = σ(·)`, `g = tanh(·)`, `c = f⊙c_prev + i⊙g`, `h = o⊙tanh(c)`.
pub fn lstm_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = params.hidden();
    if x.len() != params.w.cols || h_prev.len() != h || c_prev.len() != h || params.b.rows != 4 * h
    {
        return Err(Error::InvalidInput(format!(
            "lstm_step shape mismatch: x {}, h {}, c {} for weights {}x{} / hidden {h}",
            x.len(),
            h_prev.len(),
            c_prev.len(),
            params.w.rows,
            params.w.cols
        )));
    }
    let step = step_forward(x, h_prev, c_prev, params);
    Ok((step.h, step.c))
}

#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    /// Activated gates `[i, f, o, g]`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

fn step_forward(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &LstmParams) -> StepCache {
    let h = p.hidden();
    let mut z = p.b.data.clone();
    p.w.matvec_acc(x, &mut z);
    p.u.matvec_acc(h_prev, &mut z);
    for v in &mut z[..3 * h] {
        *v = sigmoid(*v);
    }
    for v in &mut z[3 * h..] {
        *v = v.tanh();
    }
    let mut c = vec![0.0; h];
    let mut tanh_c = vec![0.0; h];
    let mut hs = vec![0.0; h];
    for k in 0..h {
        let (i, f, o, g) = (z[k], z[h + k], z[2 * h + k], z[3 * h + k]);
        c[k] = f * c_prev[k] + i * g;
        tanh_c[k] = c[k].tanh();
        hs[k] = o * tanh_c[k];
    }
    StepCache {
        gates: z,
        c,
        tanh_c,
        h: hs,
    }
}

/// Caches of one direction, in processing order.
#[derive(Debug, Clone)]
pub(crate) struct DirectionCache {
    pub steps: Vec<StepCache>,
}

/// Run one direction over `inputs` taken in `order`.
pub(crate) fn run_direction(
    inputs: &[Vec<f64>],
    order: impl Iterator<Item = usize>,
    p: &LstmParams,
) -> DirectionCache {
    let h = p.hidden();
    let zeros = vec![0.0; h];
    let mut steps: Vec<StepCache> = Vec::with_capacity(inputs.len());
    for t in order {
        let (h_prev, c_prev) = match steps.last() {
            Some(s) => (&s.h[..], &s.c[..]),
            None => (&zeros[..], &zeros[..]),
        };
        let step = step_forward(&inputs[t], h_prev, c_prev, p);
        steps.push(step);
    }
    DirectionCache { steps }
}

#[derive(Debug, Clone)]
pub(crate) struct BiLstmCache {
    pub fwd: DirectionCache,
    pub bwd: DirectionCache,
    /// `[h_fwd(t) ; h_bwd(t)]` per input position.
    pub outputs: Vec<Vec<f64>>,
}

pub(crate) fn bilstm_forward(
    inputs: &[Vec<f64>],
    fwd: &LstmParams,
    bwd: &LstmParams,
) -> BiLstmCache {
    let n = inputs.len();
    let f = run_direction(inputs, 0..n, fwd);
    let b = run_direction(inputs, (0..n).rev(), bwd);
    let outputs = (0..n)
        .map(|t| {
            let mut o = f.steps[t].h.clone();
            o.extend_from_slice(&b.steps[n - 1 - t].h);
            o
        })
        .collect();
    BiLstmCache {
        fwd: f,
        bwd: b,
        outputs,
    }
}

/// Bidirectional LSTM from zero initial states; output `t` is
/// `[h_fwd(t) ; h_bwd(t)]`.
pub fn bilstm(inputs: &[Vec<f64>], fwd: &LstmParams, bwd: &LstmParams) -> Result<Vec<Vec<f64>>> {
    if inputs.is_empty() {
        return Err(Error::InvalidInput(
            "bilstm needs at least one input vector".into(),
        ));
    }
    if let Some(x) = inputs
        .iter()
        .find(|x| x.len() != fwd.w.cols || x.len() != bwd.w.cols)
    {
        return Err(Error::InvalidInput(format!(
            "bilstm input of width {} for weights expecting {}",
            x.len(),
            fwd.w.cols
        )));
    }
    Ok(bilstm_forward(inputs, fwd, bwd).outputs)
}

#[derive(Debug)]
pub(crate) struct LstmGrads<'a> {
    pub w: &'a mut Tensor,
    pub u: &'a mut Tensor,
    pub b: &'a mut Tensor,
}

/// Backpropagate one direction. `dh_out[s]` is the loss gradient with respect
/// to the hidden output at processing step `s`; `input_at(s)` maps a step to
/// its input position. Input gradients are accumulated into `d_inputs`
/// restricted to columns `input_cols` of the input (the trainable slice).
#[allow(clippy::too_many_arguments)]
pub(crate) fn direction_backward(
    cache: &DirectionCache,
    inputs: &[Vec<f64>],
    input_at: impl Fn(usize) -> usize,
    dh_out: &[Vec<f64>],
    p: &LstmParams,
    grads: LstmGrads<'_>,
    input_cols: std::ops::Range<usize>,
    d_inputs: &mut [Vec<f64>],
) {
    let h = p.hidden();
    let zeros = vec![0.0; h];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    let d_cols = p.w.cols;
    for s in (0..cache.steps.len()).rev() {
        let step = &cache.steps[s];
        let (h_prev, c_prev) = if s == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (&cache.steps[s - 1].h[..], &cache.steps[s - 1].c[..])
        };
        let g = &step.gates;
        for k in 0..h {
            let (i, f, o, gg) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let dh = dh_out[s][k] + dh_next[k];
            let tc = step.tanh_c[k];
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            let di = dc * gg;
            let dg = dc * i;
            let df = dc * c_prev[k];
            dc_next[k] = dc * f;
            dz[k] = di * i * (1.0 - i);
            dz[h + k] = df * f * (1.0 - f);
            dz[2 * h + k] = d_o * o * (1.0 - o);
            dz[3 * h + k] = dg * (1.0 - gg * gg);
        }
        let t = input_at(s);
        grads.w.outer_acc(&dz, &inputs[t]);
        grads.u.outer_acc(&dz, h_prev);
        for (b, d) in grads.b.data.iter_mut().zip(&dz) {
            *b += d;
        }
        if !input_cols.is_empty() {
            let dx = &mut d_inputs[t];
            for (r, &d) in dz.iter().enumerate() {
                if d != 0.0 {
                    let row = &p.w.data[r * d_cols..(r + 1) * d_cols];
                    for (o, &w) in dx.iter_mut().zip(&row[input_cols.clone()]) {
                        *o += d * w;
                    }
                }
            }
        }
        dh_next.fill(0.0);
        p.u.matvec_t_acc(&dz, &mut dh_next);
    }
}

use super::params::{MlpParams, ModelParameters};
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moments and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: ModelParameters,
    v: ModelParameters,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParameters) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update. Gradients are checked for finiteness
/// before anything is modified.
pub fn optimizer_step(
    params: &mut ModelParameters,
    grads: &ModelParameters,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if let Some((name, _)) = grads.tensors().into_iter().find(|(_, g)| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(name.to_string()));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let grads = grads.tensors();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for ((((_, p), (_, g)), (_, m)), (_, v)) in
        params.tensors_mut().into_iter().zip(grads).zip(ms).zip(vs)
    {
        adam_update(p, g, m, v, lr, c1, c2);
    }
    Ok(())
}

fn adam_update(
    p: &mut Tensor,
    g: &Tensor,
    m: &mut Tensor,
    v: &mut Tensor,
    lr: f64,
    c1: f64,
    c2: f64,
) {
    for (((p, &g), m), v) in p
        .data
        .iter_mut()
        .zip(&g.data)
        .zip(m.data.iter_mut())
        .zip(v.data.iter_mut())
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
    }
}

/// Adam over a standalone MLP head.
#[derive(Debug, Clone)]
pub struct MlpAdam {
    m: MlpParams,
    v: MlpParams,
    t: i32,
}

impl MlpAdam {
    pub fn new(p: &MlpParams) -> Self {
        let z = MlpParams::zeros(p.w1.cols, p.w1.rows, p.w2.rows);
        Self {
            m: z.clone(),
            v: z,
            t: 0,
        }
    }

    pub fn step(&mut self, p: &mut MlpParams, g: &MlpParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        adam_update(&mut p.w1, &g.w1, &mut self.m.w1, &mut self.v.w1, lr, c1, c2);
        adam_update(&mut p.b1, &g.b1, &mut self.m.b1, &mut self.v.b1, lr, c1, c2);
        adam_update(&mut p.w2, &g.w2, &mut self.m.w2, &mut self.v.w2, lr, c1, c2);
        adam_update(&mut p.b2, &g.b2, &mut self.m.b2, &mut self.v.b2, lr, c1, c2);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::ModelShape;

    fn shape() -> ModelShape {
        ModelShape {
            d_static: 2,
            d_trainable: 1,
            vocab_rows: 2,
            h_lstm: 1,
            hidden: 2,
            n_hand: 0,
            n_tfidf: 0,
            use_lstm: true,
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = ModelParameters::init(&shape(), 0);
        let before = p.clone();
        let g = p.zeros_like();
        let mut st = AdamState::new(&p);
        optimizer_step(&mut p, &g, &mut st, 0.1).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        let mut p = ModelParameters::zeros(&shape());
        p.att_b.data[0] = 1.0;
        let mut g = p.zeros_like();
        g.att_b.data[0] = 0.5;
        let mut st = AdamState::new(&p);
        optimizer_step(&mut p, &g, &mut st, 0.1).unwrap();
        // m̂ = 0.5, v̂ = 0.25 → Δ = -0.1 · 0.5 / (0.5 + 1e-8)
        let expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
        assert!((p.att_b.data[0] - expected).abs() < 1e-15);
        assert!((p.att_b.data[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn non_finite_gradient_is_named() {
        let mut p = ModelParameters::zeros(&shape());
        let mut g = p.zeros_like();
        g.section.w2.data[0] = f64::NAN;
        let mut st = AdamState::new(&p);
        let err = optimizer_step(&mut p, &g, &mut st, 0.1).unwrap_err();
        assert!(err.to_string().contains("section.w2"), "{err}");
        assert_eq!(st.steps(), 0);
    }
}

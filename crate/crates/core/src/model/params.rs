use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{PurposeLabel, SectionLabel};
use crate::embeddings::TRAINABLE_INIT;
use crate::features::N_HAND_FEATURES;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Sizes that fix every tensor shape.
///
/// | tensor                  | shape                                |
/// |-------------------------|--------------------------------------|
/// | `embedding`             | `vocab_rows x d_trainable`           |
/// | `{fwd,bwd}.w`           | `4*h_lstm x (d_static + d_trainable)`|
/// | `{fwd,bwd}.u`           | `4*h_lstm x h_lstm`                  |
/// | `{fwd,bwd}.b`           | `4*h_lstm x 1`                       |
/// | `attention.w`           | `2*h_lstm x 2*h_lstm`                |
/// | `attention.b`, `.u`     | `2*h_lstm x 1`                       |
/// | `purpose.w1`            | `hidden x (2*h_lstm + n_hand + n_tfidf)` |
/// | `worthiness.w1`, `section.w1` | `hidden x 2*h_lstm`            |
/// | `*.b1`                  | `hidden x 1`                         |
/// | `*.w2`, `*.b2`          | `classes x hidden`, `classes x 1`    |
///
/// LSTM gate rows are ordered input, forget, output, candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub d_static: usize,
    pub d_trainable: usize,
    pub vocab_rows: usize,
    pub h_lstm: usize,
    pub hidden: usize,
    /// 9 with hand features, 0 when that module is removed.
    pub n_hand: usize,
    /// TF-IDF width, 0 when that module is removed.
    pub n_tfidf: usize,
    /// When false the purpose head sees a zero sentence vector.
    pub use_lstm: bool,
}

impl ModelShape {
    pub fn d_in(&self) -> usize {
        self.d_static + self.d_trainable
    }

    pub fn encoding_dim(&self) -> usize {
        2 * self.h_lstm
    }

    pub fn purpose_input(&self) -> usize {
        self.encoding_dim() + self.n_hand + self.n_tfidf
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_lstm == 0 || self.hidden == 0 || self.d_in() == 0 || self.vocab_rows == 0 {
            return Err(Error::Config(format!("degenerate model shape {self:?}")));
        }
        if self.n_hand != 0 && self.n_hand != N_HAND_FEATURES {
            return Err(Error::Config(format!(
                "n_hand must be 0 or {N_HAND_FEATURES}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

impl LstmParams {
    pub fn zeros(d_in: usize, h: usize) -> Self {
        Self {
            w: Tensor::zeros(4 * h, d_in),
            u: Tensor::zeros(4 * h, h),
            b: Tensor::zeros(4 * h, 1),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

impl MlpParams {
    pub fn zeros(input: usize, hidden: usize, classes: usize) -> Self {
        Self {
            w1: Tensor::zeros(hidden, input),
            b1: Tensor::zeros(hidden, 1),
            w2: Tensor::zeros(classes, hidden),
            b2: Tensor::zeros(classes, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub embedding: Tensor,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub att_w: Tensor,
    pub att_b: Tensor,
    pub att_u: Tensor,
    pub purpose: MlpParams,
    pub worthiness: MlpParams,
    pub section: MlpParams,
}

pub const N_TENSORS: usize = 22;

impl ModelParameters {
    pub fn zeros(shape: &ModelShape) -> Self {
        let h = shape.h_lstm;
        let enc = shape.encoding_dim();
        Self {
            embedding: Tensor::zeros(shape.vocab_rows, shape.d_trainable),
            fwd: LstmParams::zeros(shape.d_in(), h),
            bwd: LstmParams::zeros(shape.d_in(), h),
            att_w: Tensor::zeros(enc, enc),
            att_b: Tensor::zeros(enc, 1),
            att_u: Tensor::zeros(enc, 1),
            purpose: MlpParams::zeros(shape.purpose_input(), shape.hidden, PurposeLabel::COUNT),
            worthiness: MlpParams::zeros(enc, shape.hidden, 2),
            section: MlpParams::zeros(enc, shape.hidden, SectionLabel::COUNT),
        }
    }

    /// Seeded initialization: trainable embedding rows uniform in ±0.05,
    /// weight matrices Glorot-uniform, biases zero except the LSTM forget
    /// gate (1.0). Weights are drawn in a fixed order from one
    /// ChaCha8 stream.
    pub fn init(shape: &ModelShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(shape);
        p.embedding = Tensor::uniform(
            shape.vocab_rows,
            shape.d_trainable,
            TRAINABLE_INIT,
            &mut rng,
        );
        for dir in [&mut p.fwd, &mut p.bwd] {
            let h = dir.hidden();
            dir.w = Tensor::glorot(dir.w.rows, dir.w.cols, &mut rng);
            dir.u = Tensor::glorot(dir.u.rows, dir.u.cols, &mut rng);
            dir.b.data[h..2 * h].iter_mut().for_each(|x| *x = 1.0);
        }
        p.att_w = Tensor::glorot(p.att_w.rows, p.att_w.cols, &mut rng);
        p.att_u = Tensor::glorot(p.att_u.rows, 1, &mut rng);
        for head in [&mut p.purpose, &mut p.worthiness, &mut p.section] {
            head.w1 = Tensor::glorot(head.w1.rows, head.w1.cols, &mut rng);
            head.w2 = Tensor::glorot(head.w2.rows, head.w2.cols, &mut rng);
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|(_, t)| t.fill(0.0));
        z
    }

    /// Every tensor with its stable name, in a fixed order.
    pub fn tensors(&self) -> [(&'static str, &Tensor); N_TENSORS] {
        [
            ("embedding", &self.embedding),
            ("fwd.w", &self.fwd.w),
            ("fwd.u", &self.fwd.u),
            ("fwd.b", &self.fwd.b),
            ("bwd.w", &self.bwd.w),
            ("bwd.u", &self.bwd.u),
            ("bwd.b", &self.bwd.b),
            ("attention.w", &self.att_w),
            ("attention.b", &self.att_b),
            ("attention.u", &self.att_u),
            ("purpose.w1", &self.purpose.w1),
            ("purpose.b1", &self.purpose.b1),
            ("purpose.w2", &self.purpose.w2),
            ("purpose.b2", &self.purpose.b2),
            ("worthiness.w1", &self.worthiness.w1),
            ("worthiness.b1", &self.worthiness.b1),
            ("worthiness.w2", &self.worthiness.w2),
            ("worthiness.b2", &self.worthiness.b2),
            ("section.w1", &self.section.w1),
            ("section.b1", &self.section.b1),
            ("section.w2", &self.section.w2),
            ("section.b2", &self.section.b2),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor); N_TENSORS] {
        [
            ("embedding", &mut self.embedding),
            ("fwd.w", &mut self.fwd.w),
            ("fwd.u", &mut self.fwd.u),
            ("fwd.b", &mut self.fwd.b),
            ("bwd.w", &mut self.bwd.w),
            ("bwd.u", &mut self.bwd.u),
            ("bwd.b", &mut self.bwd.b),
            ("attention.w", &mut self.att_w),
            ("attention.b", &mut self.att_b),
            ("attention.u", &mut self.att_u),
            ("purpose.w1", &mut self.purpose.w1),
            ("purpose.b1", &mut self.purpose.b1),
            ("purpose.w2", &mut self.purpose.w2),
            ("purpose.b2", &mut self.purpose.b2),
            ("worthiness.w1", &mut self.worthiness.w1),
            ("worthiness.b1", &mut self.worthiness.b1),
            ("worthiness.w2", &mut self.worthiness.w2),
            ("worthiness.b2", &mut self.worthiness.b2),
            ("section.w1", &mut self.section.w1),
            ("section.b1", &mut self.section.b1),
            ("section.w2", &mut self.section.w2),
            ("section.b2", &mut self.section.b2),
        ]
    }

    /// `(name, rows, cols)` for every tensor.
    pub fn shape_table(&self) -> Vec<ShapeEntry> {
        self.tensors()
            .iter()
            .map(|(name, t)| ShapeEntry {
                name: name.to_string(),
                rows: t.rows,
                cols: t.cols,
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

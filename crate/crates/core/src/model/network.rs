//! Forward pass, multi-task loss and reverse-mode gradients of the whole
//! network.

use serde::{Deserialize, Serialize};

use super::attention::{attention_backward, attention_forward, AttentionCache, AttentionGrads};
use super::lstm::{bilstm_forward, direction_backward, BiLstmCache, LstmGrads};
use super::mlp::{mlp_backward, mlp_forward, HeadInput};
use super::params::{MlpParams, ModelParameters, ModelShape};
use crate::corpus::{PurposeLabel, SectionLabel};
use crate::embeddings::{gather_inputs, EncodedTokens, WordVectorTable};
use crate::features::N_HAND_FEATURES;
use crate::tensor::{argmax, softmax};
use crate::tfidf::SparseVector;
use crate::{Error, Result};

/// A purpose-classification example. Hand features are expected
/// standardized and the TF-IDF vector in its final (normalized) form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurposeItem {
    pub tokens: EncodedTokens,
    pub hand: Option<[f64; N_HAND_FEATURES]>,
    pub tfidf: Option<SparseVector>,
    /// Class index in [`PurposeLabel`] order.
    pub label: Option<usize>,
}

/// A worthiness or section example: only a sentence and a class index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaffoldItem {
    pub tokens: EncodedTokens,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Purpose,
    Worthiness,
    Section,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::Purpose => PurposeLabel::COUNT,
            Task::Worthiness => 2,
            Task::Section => SectionLabel::COUNT,
        }
    }
}

/// Items of a single task.
#[derive(Debug, Clone)]
pub enum TaskBatch<'a> {
    Purpose(Vec<&'a PurposeItem>),
    Worthiness(Vec<&'a ScaffoldItem>),
    Section(Vec<&'a ScaffoldItem>),
}

impl TaskBatch<'_> {
    pub fn task(&self) -> Task {
        match self {
            TaskBatch::Purpose(_) => Task::Purpose,
            TaskBatch::Worthiness(_) => Task::Worthiness,
            TaskBatch::Section(_) => Task::Section,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TaskBatch::Purpose(v) => v.len(),
            TaskBatch::Worthiness(v) | TaskBatch::Section(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub purpose: f64,
    pub worthiness: f64,
    pub section: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            purpose: 1.0,
            worthiness: 0.1,
            section: 0.1,
        }
    }
}

impl LossWeights {
    pub fn get(&self, task: Task) -> f64 {
        match task {
            Task::Purpose => self.purpose,
            Task::Worthiness => self.worthiness,
            Task::Section => self.section,
        }
    }
}

/// `-ln softmax(logits)[label]`, evaluated with the maximum subtracted.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Weighted sum of the per-task mean losses present in a step.
pub fn multitask_loss(losses: &TaskLosses, weights: &LossWeights) -> f64 {
    [
        (losses.purpose, weights.purpose),
        (losses.worthiness, weights.worthiness),
        (losses.section, weights.section),
    ]
    .iter()
    .filter_map(|(l, w)| l.map(|l| w * l))
    .sum()
}

/// Per-task mean cross-entropy of one step; `None` for absent tasks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskLosses {
    pub purpose: Option<f64>,
    pub worthiness: Option<f64>,
    pub section: Option<f64>,
}

impl TaskLosses {
    fn set(&mut self, task: Task, value: f64) {
        match task {
            Task::Purpose => self.purpose = Some(value),
            Task::Worthiness => self.worthiness = Some(value),
            Task::Section => self.section = Some(value),
        }
    }
}

/// Dropout masks for every item of every batch in a step, `None` meaning no
/// dropout for that item.
pub type StepMasks = Vec<Vec<Option<Vec<f64>>>>;

pub fn no_masks(batches: &[TaskBatch<'_>]) -> StepMasks {
    batches.iter().map(|b| vec![None; b.len()]).collect()
}

struct Encoded {
    inputs: Vec<Vec<f64>>,
    lstm: BiLstmCache,
    attention: AttentionCache,
}

/// Read-only view of a network: shape, parameters and the frozen static table.
#[derive(Clone, Copy)]
pub struct Net<'a> {
    pub shape: &'a ModelShape,
    pub params: &'a ModelParameters,
    pub table: &'a WordVectorTable,
}

impl<'a> Net<'a> {
    pub fn new(
        shape: &'a ModelShape,
        params: &'a ModelParameters,
        table: &'a WordVectorTable,
    ) -> Self {
        Self {
            shape,
            params,
            table,
        }
    }

    fn encode(&self, tokens: &EncodedTokens) -> Result<Encoded> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput(
                "cannot encode an empty token sequence".into(),
            ));
        }
        let inputs = gather_inputs(tokens, self.table, &self.params.embedding);
        let lstm = bilstm_forward(&inputs, &self.params.fwd, &self.params.bwd);
        let p = self.params;
        let attention = attention_forward(&lstm.outputs, &p.att_w, &p.att_b, &p.att_u);
        Ok(Encoded {
            inputs,
            lstm,
            attention,
        })
    }

    /// Attention-pooled sentence encoding (width `2 * h_lstm`).
    pub fn sentence_vector(&self, tokens: &EncodedTokens) -> Result<Vec<f64>> {
        Ok(self.encode(tokens)?.attention.output)
    }

    /// `[sentence ; hand ; tfidf]`, with slots sized by the shape.
    fn purpose_input(&self, item: &PurposeItem, sentence: Option<&[f64]>) -> Result<HeadInput> {
        let enc = self.shape.encoding_dim();
        let mut dense = Vec::with_capacity(enc + self.shape.n_hand);
        match sentence {
            Some(s) => dense.extend_from_slice(s),
            None => dense.resize(enc, 0.0),
        }
        if self.shape.n_hand > 0 {
            let hand = item.hand.ok_or_else(|| {
                Error::InvalidInput("purpose item is missing hand features".into())
            })?;
            dense.extend_from_slice(&hand);
        }
        let mut sparse = Vec::new();
        if self.shape.n_tfidf > 0 {
            let v = item.tfidf.as_ref().ok_or_else(|| {
                Error::InvalidInput("purpose item is missing its TF-IDF vector".into())
            })?;
            if v.dim != self.shape.n_tfidf {
                return Err(Error::InvalidInput(format!(
                    "TF-IDF vector of width {} for a model expecting {}",
                    v.dim, self.shape.n_tfidf
                )));
            }
            let offset = dense.len();
            sparse.extend(v.entries.iter().map(|&(i, x)| (offset + i, x)));
        }
        Ok(HeadInput { dense, sparse })
    }

    fn head(&self, task: Task) -> &'a MlpParams {
        match task {
            Task::Purpose => &self.params.purpose,
            Task::Worthiness => &self.params.worthiness,
            Task::Section => &self.params.section,
        }
    }

    /// Six purpose logits.
    pub fn purpose_logits(&self, item: &PurposeItem, mask: Option<&[f64]>) -> Result<Vec<f64>> {
        let sentence = if self.shape.use_lstm {
            Some(self.encode(&item.tokens)?.attention.output)
        } else {
            None
        };
        let input = self.purpose_input(item, sentence.as_deref())?;
        Ok(mlp_forward(&self.params.purpose, &input, mask).0)
    }

    /// Logits of a scaffold head (2 for worthiness, 7 for section).
    pub fn scaffold_logits(
        &self,
        task: Task,
        item: &ScaffoldItem,
        mask: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        if task == Task::Purpose {
            return Err(Error::InvalidInput(
                "scaffold_logits called for the purpose task".into(),
            ));
        }
        let s = self.encode(&item.tokens)?.attention.output;
        Ok(mlp_forward(self.head(task), &HeadInput::dense(s), mask).0)
    }

    /// Predicted label (ties to the lowest index) and class probabilities,
    /// without dropout.
    pub fn predict(&self, item: &PurposeItem) -> Result<(PurposeLabel, Vec<f64>)> {
        let probs = softmax(&self.purpose_logits(item, None)?);
        let label = PurposeLabel::from_index(argmax(&probs)).expect("six purpose classes");
        Ok((label, probs))
    }

    pub fn predict_scaffold(&self, task: Task, item: &ScaffoldItem) -> Result<usize> {
        Ok(argmax(&self.scaffold_logits(task, item, None)?))
    }

    /// Forward one item, optionally backpropagating `scale · ∂CE/∂logits`.
    #[allow(clippy::too_many_arguments)]
    fn item_pass(
        &self,
        task: Task,
        tokens: &EncodedTokens,
        purpose: Option<&PurposeItem>,
        label: usize,
        mask: Option<&[f64]>,
        scale: f64,
        grads: Option<&mut ModelParameters>,
    ) -> Result<f64> {
        if label >= task.n_classes() {
            return Err(Error::InvalidInput(format!(
                "label {label} out of range for {task:?} ({} classes)",
                task.n_classes()
            )));
        }
        let needs_encoder = task != Task::Purpose || self.shape.use_lstm;
        let encoded = if needs_encoder {
            Some(self.encode(tokens)?)
        } else {
            None
        };
        let sentence = encoded.as_ref().map(|e| e.attention.output.as_slice());
        let input = match purpose {
            Some(item) => self.purpose_input(item, sentence)?,
            None => HeadInput::dense(sentence.expect("scaffold tasks always encode").to_vec()),
        };
        let head = self.head(task);
        let (logits, cache) = mlp_forward(head, &input, mask);
        let loss = cross_entropy(&logits, label);

        let Some(grads) = grads else {
            return Ok(loss);
        };
        let mut d_logits = softmax(&logits);
        d_logits[label] -= 1.0;
        d_logits.iter_mut().for_each(|d| *d *= scale);
        let head_grads = match task {
            Task::Purpose => &mut grads.purpose,
            Task::Worthiness => &mut grads.worthiness,
            Task::Section => &mut grads.section,
        };
        let enc_width = if encoded.is_some() {
            self.shape.encoding_dim()
        } else {
            0
        };
        let d_sentence = mlp_backward(head, head_grads, &input, mask, &cache, &d_logits, enc_width);
        if let Some(enc) = encoded {
            self.encoder_backward(tokens, &enc, &d_sentence, grads);
        }
        Ok(loss)
    }

    fn encoder_backward(
        &self,
        tokens: &EncodedTokens,
        enc: &Encoded,
        d_sentence: &[f64],
        grads: &mut ModelParameters,
    ) {
        let p = self.params;
        let h = self.shape.h_lstm;
        let n = enc.inputs.len();
        let d_hidden = attention_backward(
            &enc.attention,
            &enc.lstm.outputs,
            &p.att_w,
            &p.att_u,
            d_sentence,
            AttentionGrads {
                w: &mut grads.att_w,
                b: &mut grads.att_b,
                u: &mut grads.att_u,
            },
        );
        let trainable_cols = self.shape.d_static..self.shape.d_in();
        let mut d_inputs = vec![vec![0.0; self.shape.d_trainable]; n];

        let dh_fwd: Vec<Vec<f64>> = (0..n).map(|t| d_hidden[t][..h].to_vec()).collect();
        direction_backward(
            &enc.lstm.fwd,
            &enc.inputs,
            |s| s,
            &dh_fwd,
            &p.fwd,
            LstmGrads {
                w: &mut grads.fwd.w,
                u: &mut grads.fwd.u,
                b: &mut grads.fwd.b,
            },
            trainable_cols.clone(),
            &mut d_inputs,
        );
        let dh_bwd: Vec<Vec<f64>> = (0..n).map(|s| d_hidden[n - 1 - s][h..].to_vec()).collect();
        direction_backward(
            &enc.lstm.bwd,
            &enc.inputs,
            |s| n - 1 - s,
            &dh_bwd,
            &p.bwd,
            LstmGrads {
                w: &mut grads.bwd.w,
                u: &mut grads.bwd.u,
                b: &mut grads.bwd.b,
            },
            trainable_cols,
            &mut d_inputs,
        );
        for (row, d) in tokens.trainable_rows.iter().zip(&d_inputs) {
            for (g, v) in grads.embedding.row_mut(*row).iter_mut().zip(d) {
                *g += v;
            }
        }
    }

    fn run_step(
        &self,
        batches: &[TaskBatch<'_>],
        masks: &StepMasks,
        weights: &LossWeights,
        mut grads: Option<&mut ModelParameters>,
    ) -> Result<TaskLosses> {
        let mut losses = TaskLosses::default();
        for (b, batch) in batches.iter().enumerate() {
            if batch.is_empty() {
                continue;
            }
            let task = batch.task();
            let weight = weights.get(task);
            let scale = weight / batch.len() as f64;
            let mut sum = 0.0;
            for i in 0..batch.len() {
                let mask = masks
                    .get(b)
                    .and_then(|m| m.get(i))
                    .and_then(|m| m.as_deref());
                let g = if weight != 0.0 {
                    grads.as_deref_mut()
                } else {
                    None
                };
                sum += match batch {
                    TaskBatch::Purpose(items) => {
                        let item = items[i];
                        let label = item.label.ok_or_else(|| {
                            Error::InvalidInput("unlabeled purpose item in a training batch".into())
                        })?;
                        self.item_pass(task, &item.tokens, Some(item), label, mask, scale, g)?
                    }
                    TaskBatch::Worthiness(items) | TaskBatch::Section(items) => {
                        let item = items[i];
                        self.item_pass(task, &item.tokens, None, item.label, mask, scale, g)?
                    }
                };
            }
            losses.set(task, sum / batch.len() as f64);
        }
        Ok(losses)
    }

    /// Per-task mean losses of a step, without gradients.
    pub fn step_losses(
        &self,
        batches: &[TaskBatch<'_>],
        masks: &StepMasks,
        weights: &LossWeights,
    ) -> Result<TaskLosses> {
        self.run_step(batches, masks, weights, None)
    }

    /// Exact gradients of `Σ_task w_task · mean CE_task` over the step's
    /// batches. Items are processed in batch order, so accumulation order is
    /// fixed. Tasks with weight 0 contribute a loss value but no gradient.
    pub fn compute_gradients(
        &self,
        batches: &[TaskBatch<'_>],
        masks: &StepMasks,
        weights: &LossWeights,
    ) -> Result<(TaskLosses, ModelParameters)> {
        let mut grads = self.params.zeros_like();
        let losses = self.run_step(batches, masks, weights, Some(&mut grads))?;
        Ok((losses, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::TrainableVocab;

    fn tiny() -> (ModelShape, WordVectorTable) {
        let table = WordVectorTable::from_pairs(vec![
            ("a".into(), vec![0.1, 0.2]),
            ("b".into(), vec![-0.3, 0.4]),
        ])
        .unwrap();
        let shape = ModelShape {
            d_static: 2,
            d_trainable: 2,
            vocab_rows: 3,
            h_lstm: 2,
            hidden: 3,
            n_hand: 9,
            n_tfidf: 4,
            use_lstm: true,
        };
        (shape, table)
    }

    fn item(vocab: &TrainableVocab, table: &WordVectorTable) -> PurposeItem {
        PurposeItem {
            tokens: crate::embeddings::index_tokens(&["a", "b", "zz"], table, vocab).unwrap(),
            hand: Some([0.5; 9]),
            tfidf: Some(SparseVector {
                dim: 4,
                entries: vec![(1, 0.6), (3, 0.8)],
            }),
            label: Some(2),
        }
    }

    #[test]
    fn ce_examples() {
        assert!((cross_entropy(&[0.0; 6], 3) - 6f64.ln()).abs() < 1e-15);
        assert!((cross_entropy(&[2.5; 2], 0) - 2f64.ln()).abs() < 1e-15);
        assert!(cross_entropy(&[1000.0, -1000.0], 1).is_finite());
        let losses = TaskLosses {
            purpose: Some(1.0),
            worthiness: Some(2.0),
            section: Some(3.0),
        };
        let w = LossWeights {
            purpose: 1.0,
            worthiness: 0.1,
            section: 0.1,
        };
        assert!((multitask_loss(&losses, &w) - 1.5).abs() < 1e-15);
        let partial = TaskLosses {
            purpose: Some(1.0),
            ..Default::default()
        };
        assert_eq!(multitask_loss(&partial, &w), 1.0);
    }

    #[test]
    fn zero_network_outputs_head_bias() {
        let (shape, table) = tiny();
        let vocab = TrainableVocab::build(["a"]);
        let mut params = ModelParameters::zeros(&shape);
        params.purpose.b2.data = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let net = Net::new(&shape, &params, &table);
        let mut it = item(&vocab, &table);
        it.hand = Some([0.0; 9]);
        it.tfidf = Some(SparseVector::zeros(4));
        assert_eq!(
            net.purpose_logits(&it, None).unwrap(),
            params.purpose.b2.data
        );
    }

    #[test]
    fn missing_features_error() {
        let (shape, table) = tiny();
        let vocab = TrainableVocab::build(["a"]);
        let params = ModelParameters::init(&shape, 1);
        let net = Net::new(&shape, &params, &table);
        let mut it = item(&vocab, &table);
        it.hand = None;
        assert!(net.purpose_logits(&it, None).is_err());
        let mut it = item(&vocab, &table);
        it.tfidf = None;
        assert!(net.purpose_logits(&it, None).is_err());
    }

    #[test]
    fn predict_ties_and_probabilities() {
        let (shape, table) = tiny();
        let vocab = TrainableVocab::build(["a"]);
        let params = ModelParameters::zeros(&shape);
        let net = Net::new(&shape, &params, &table);
        let (label, probs) = net.predict(&item(&vocab, &table)).unwrap();
        assert_eq!(label, PurposeLabel::Background);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let mut shifted = ModelParameters::init(&shape, 4);
        let before = Net::new(&shape, &shifted, &table)
            .predict(&item(&vocab, &table))
            .unwrap()
            .0;
        shifted.purpose.b2.data.iter_mut().for_each(|b| *b += 17.0);
        let after = Net::new(&shape, &shifted, &table)
            .predict(&item(&vocab, &table))
            .unwrap()
            .0;
        assert_eq!(before, after);
    }

    #[test]
    fn unused_head_gets_no_gradient() {
        let (shape, table) = tiny();
        let vocab = TrainableVocab::build(["a", "b"]);
        let params = ModelParameters::init(&shape, 3);
        let net = Net::new(&shape, &params, &table);
        let p_item = item(&vocab, &table);
        let s_item = ScaffoldItem {
            tokens: p_item.tokens.clone(),
            label: 5,
        };
        let batches = vec![
            TaskBatch::Purpose(vec![&p_item]),
            TaskBatch::Section(vec![&s_item]),
        ];
        let w = LossWeights {
            purpose: 1.0,
            worthiness: 0.1,
            section: 0.0,
        };
        let (losses, grads) = net
            .compute_gradients(&batches, &no_masks(&batches), &w)
            .unwrap();
        assert!(losses.section.is_some());
        for t in [
            &grads.section.w1,
            &grads.section.b1,
            &grads.section.w2,
            &grads.section.b2,
        ] {
            assert!(t.data.iter().all(|&g| g == 0.0));
        }
        assert!(grads.purpose.w2.data.iter().any(|&g| g != 0.0));
    }

    #[test]
    fn logit_shift_keeps_inter_class_gradient() {
        let logits = [0.3, -1.2, 2.0, 0.0, 0.7, -0.4];
        let shifted: Vec<f64> = logits.iter().map(|z| z + 5.0).collect();
        let grad = |l: &[f64]| {
            let mut g = softmax(l);
            g[4] -= 1.0;
            g
        };
        let (g1, g2) = (grad(&logits), grad(&shifted));
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(argmax(&logits), argmax(&shifted));
    }
}

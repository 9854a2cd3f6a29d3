//! Multi-task training loop with early stopping on validation macro-F1.
//!
//! Schedule: each epoch shuffles the purpose training items and walks them in
//! batches. Every `scaffold_every`-th optimizer step (counted across epochs)
//! also carries one worthiness batch and one section batch, drawn cyclically
//! from their reshuffled training sets, so that step minimizes
//! `w_p·L_p + w_w·L_w + w_s·L_s`. Scaffold tasks with weight 0 or no data are
//! never scheduled.
//!
//! Randomness comes from independent ChaCha8 streams of the run seed: purpose
//! order, purpose dropout, and one stream per scaffold task. Removing a
//! scaffold task therefore leaves the purpose stream untouched.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::sample_dropout_mask;
use super::network::{multitask_loss, Net, PurposeItem, ScaffoldItem, StepMasks, Task, TaskBatch};
use super::optim::{optimizer_step, AdamState};
use super::params::{ModelParameters, ModelShape};
use super::TrainConfig;
use crate::embeddings::WordVectorTable;
use crate::eval::macro_f1_indices;
use crate::{Error, Result};

const STREAM_ORDER: u64 = 1;
const STREAM_DROPOUT: u64 = 2;
const STREAM_WORTHINESS: u64 = 3;
const STREAM_SECTION: u64 = 4;

pub(crate) fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainingData<'a> {
    pub purpose_train: &'a [PurposeItem],
    /// When empty, early stopping monitors training macro-F1 instead.
    pub purpose_val: &'a [PurposeItem],
    pub worthiness_train: &'a [ScaffoldItem],
    pub worthiness_val: &'a [ScaffoldItem],
    pub section_train: &'a [ScaffoldItem],
    pub section_val: &'a [ScaffoldItem],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub purpose_loss: f64,
    pub worthiness_loss: Option<f64>,
    pub section_loss: Option<f64>,
    pub val_macro_f1: f64,
    pub worthiness_val_accuracy: Option<f64>,
    pub section_val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub stopped_epoch: usize,
    /// `"validation"` or `"training"`: which split the F1 column was measured on.
    pub monitored_split: String,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best epoch.
    pub params: ModelParameters,
    pub history: TrainHistory,
}

/// Patience-based early stopping on a score that should increase.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    epochs_since_best: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
            epochs_since_best: 0,
        }
    }

    /// Record the score of `epoch` (1-based). Only a strict improvement
    /// resets the patience counter.
    pub fn observe(&mut self, epoch: usize, score: f64) -> StopDecision {
        if score > self.best {
            self.best = score;
            self.best_epoch = epoch;
            self.epochs_since_best = 0;
            StopDecision::Improved
        } else {
            self.epochs_since_best += 1;
            if self.epochs_since_best >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

struct Cycler<'a> {
    items: &'a [ScaffoldItem],
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl<'a> Cycler<'a> {
    fn new(items: &'a [ScaffoldItem], rng: ChaCha8Rng) -> Self {
        let mut c = Self {
            items,
            order: (0..items.len()).collect(),
            pos: 0,
            rng,
        };
        c.order.shuffle(&mut c.rng);
        c
    }

    fn next_batch(&mut self, size: usize) -> Vec<&'a ScaffoldItem> {
        let mut out = Vec::with_capacity(size);
        for _ in 0..size.min(self.items.len()) {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(&self.items[self.order[self.pos]]);
            self.pos += 1;
        }
        out
    }

    fn masks(&mut self, n: usize, width: usize, p: f64) -> Vec<Option<Vec<f64>>> {
        (0..n)
            .map(|_| sample_dropout_mask(width, p, &mut self.rng))
            .collect()
    }
}

/// Predicted purpose indices for `items`, dropout off.
pub fn predict_indices(net: &Net<'_>, items: &[PurposeItem]) -> Result<Vec<usize>> {
    items
        .iter()
        .map(|item| net.predict(item).map(|(label, _)| label.index()))
        .collect()
}

/// Macro-F1 of the purpose head on labeled items.
pub fn purpose_macro_f1(net: &Net<'_>, items: &[PurposeItem]) -> Result<f64> {
    let preds = predict_indices(net, items)?;
    let golds = items
        .iter()
        .map(|i| {
            i.label
                .ok_or_else(|| Error::InvalidInput("unlabeled item in evaluation".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    macro_f1_indices(&preds, &golds, Task::Purpose.n_classes())
}

/// Accuracy of a scaffold head; `None` for an empty set.
pub fn scaffold_accuracy(net: &Net<'_>, task: Task, items: &[ScaffoldItem]) -> Result<Option<f64>> {
    if items.is_empty() {
        return Ok(None);
    }
    let mut correct = 0;
    for item in items {
        if net.predict_scaffold(task, item)? == item.label {
            correct += 1;
        }
    }
    Ok(Some(correct as f64 / items.len() as f64))
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Train from a fresh seeded initialization.
pub fn train(
    config: &TrainConfig,
    shape: &ModelShape,
    table: &WordVectorTable,
    data: TrainingData<'_>,
) -> Result<TrainOutcome> {
    let params = ModelParameters::init(shape, config.seed);
    train_from(config, shape, table, data, params)
}

/// Train starting from the given parameters.
pub fn train_from(
    config: &TrainConfig,
    shape: &ModelShape,
    table: &WordVectorTable,
    data: TrainingData<'_>,
    mut params: ModelParameters,
) -> Result<TrainOutcome> {
    config.validate()?;
    shape.validate()?;
    if data.purpose_train.is_empty() {
        return Err(Error::InvalidInput("no purpose training data".into()));
    }
    let weights = config.loss_weights;
    let mut order_rng = stream(config.seed, STREAM_ORDER);
    let mut dropout_rng = stream(config.seed, STREAM_DROPOUT);
    let mut worthiness =
        (weights.worthiness > 0.0 && !data.worthiness_train.is_empty()).then(|| {
            Cycler::new(
                data.worthiness_train,
                stream(config.seed, STREAM_WORTHINESS),
            )
        });
    let mut section = (weights.section > 0.0 && !data.section_train.is_empty())
        .then(|| Cycler::new(data.section_train, stream(config.seed, STREAM_SECTION)));

    let mut adam = AdamState::new(&params);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_params = params.clone();
    let mut epochs = Vec::new();
    let mut global_step = 0usize;
    let monitor_val = !data.purpose_val.is_empty();
    let hidden = shape.hidden;

    for epoch in 1..=config.max_epochs {
        let mut order: Vec<usize> = (0..data.purpose_train.len()).collect();
        order.shuffle(&mut order_rng);
        let (mut p_losses, mut w_losses, mut s_losses) = (Vec::new(), Vec::new(), Vec::new());

        for chunk in order.chunks(config.batch_size) {
            global_step += 1;
            let purpose: Vec<&PurposeItem> =
                chunk.iter().map(|&i| &data.purpose_train[i]).collect();
            let mut masks: StepMasks = vec![(0..purpose.len())
                .map(|_| sample_dropout_mask(hidden, config.dropout, &mut dropout_rng))
                .collect()];
            let mut batches = vec![TaskBatch::Purpose(purpose)];
            if global_step.is_multiple_of(config.scaffold_every) {
                if let Some(c) = worthiness.as_mut() {
                    let b = c.next_batch(config.batch_size);
                    masks.push(c.masks(b.len(), hidden, config.dropout));
                    batches.push(TaskBatch::Worthiness(b));
                }
                if let Some(c) = section.as_mut() {
                    let b = c.next_batch(config.batch_size);
                    masks.push(c.masks(b.len(), hidden, config.dropout));
                    batches.push(TaskBatch::Section(b));
                }
            }

            let net = Net::new(shape, &params, table);
            let (losses, grads) = net.compute_gradients(&batches, &masks, &weights)?;
            if !multitask_loss(&losses, &weights).is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step: global_step,
                });
            }
            p_losses.extend(losses.purpose);
            w_losses.extend(losses.worthiness);
            s_losses.extend(losses.section);
            optimizer_step(&mut params, &grads, &mut adam, config.learning_rate)?;
        }

        let net = Net::new(shape, &params, table);
        let monitored = if monitor_val {
            data.purpose_val
        } else {
            data.purpose_train
        };
        let f1 = purpose_macro_f1(&net, monitored)?;
        epochs.push(EpochRecord {
            epoch,
            purpose_loss: mean(&p_losses).unwrap_or(0.0),
            worthiness_loss: mean(&w_losses),
            section_loss: mean(&s_losses),
            val_macro_f1: f1,
            worthiness_val_accuracy: scaffold_accuracy(
                &net,
                Task::Worthiness,
                data.worthiness_val,
            )?,
            section_val_accuracy: scaffold_accuracy(&net, Task::Section, data.section_val)?,
        });
        log::debug!(
            "epoch {epoch}: purpose loss {:.4}, monitored macro-F1 {f1:.4}",
            epochs.last().unwrap().purpose_loss
        );
        match stopper.observe(epoch, f1) {
            StopDecision::Improved => best_params = params.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }

    let stopped_epoch = epochs.len();
    Ok(TrainOutcome {
        params: best_params,
        history: TrainHistory {
            epochs,
            best_epoch: stopper.best_epoch(),
            best_val_macro_f1: stopper.best(),
            stopped_epoch,
            monitored_split: if monitor_val {
                "validation"
            } else {
                "training"
            }
            .to_string(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stopping_rule() {
        let mut s = EarlyStopping::new(2);
        let decisions: Vec<_> = [0.2, 0.3, 0.25, 0.25]
            .iter()
            .enumerate()
            .map(|(i, &f)| s.observe(i + 1, f))
            .collect();
        assert_eq!(
            decisions,
            [
                StopDecision::Improved,
                StopDecision::Improved,
                StopDecision::Continue,
                StopDecision::Stop
            ]
        );
        assert_eq!(s.best_epoch(), 2);
    }

    #[test]
    fn ties_do_not_count_as_improvement() {
        let mut s = EarlyStopping::new(1);
        assert_eq!(s.observe(1, 0.5), StopDecision::Improved);
        assert_eq!(s.observe(2, 0.5), StopDecision::Stop);
        assert_eq!(s.best_epoch(), 1);
    }
}

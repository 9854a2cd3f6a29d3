//! The neural core: bidirectional LSTM, attention pooling, three MLP heads
//! (purpose, worthiness, section), hand-derived gradients, Adam and the
//! multi-task training loop.

mod attention;
mod lstm;
mod mlp;
mod network;
mod optim;
mod params;
mod train;

use serde::{Deserialize, Serialize};

pub use attention::{attention, attention_weights};
pub use lstm::{bilstm, lstm_step};
pub(crate) use mlp::{mlp_backward, mlp_forward};
pub use mlp::{sample_dropout_mask, HeadInput};
pub use network::{
    cross_entropy, multitask_loss, no_masks, LossWeights, Net, PurposeItem, ScaffoldItem,
    StepMasks, Task, TaskBatch, TaskLosses,
};
pub use optim::{optimizer_step, AdamState, MlpAdam, BETA1, BETA2, EPSILON};
pub use params::{LstmParams, MlpParams, ModelParameters, ModelShape, ShapeEntry, N_TENSORS};
pub(crate) use train::stream;
pub use train::{
    predict_indices, purpose_macro_f1, scaffold_accuracy, train, train_from, EarlyStopping,
    EpochRecord, StopDecision, TrainHistory, TrainOutcome, TrainingData,
};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss_weights: LossWeights,
    pub learning_rate: f64,
    /// Dropout on the hidden layer of every head.
    pub dropout: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub h_lstm: usize,
    /// Hidden width of the MLP heads.
    pub hidden: usize,
    pub d_trainable: usize,
    /// One batch of each scaffold task every this many purpose batches.
    pub scaffold_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_weights: LossWeights::default(),
            learning_rate: 1e-3,
            dropout: 0.5,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            seed: 13,
            h_lstm: 64,
            hidden: 128,
            d_trainable: 50,
            scaffold_every: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let w = self.loss_weights;
        let bad = |msg: String| Err(Error::Config(msg));
        if [w.purpose, w.worthiness, w.section]
            .iter()
            .any(|x| !x.is_finite() || *x < 0.0)
        {
            return bad(format!(
                "loss weights must be finite and non-negative, got {w:?}"
            ));
        }
        if !(w.purpose > 0.0 && w.purpose > w.worthiness.max(w.section)) {
            return bad(format!("the purpose loss weight must be positive and exceed both scaffold weights, got {w:?}"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        for (name, v) in [
            ("patience", self.patience),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("h_lstm", self.h_lstm),
            ("hidden", self.hidden),
            ("scaffold_every", self.scaffold_every),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let mut c = TrainConfig::default();
        c.loss_weights.worthiness = 0.0;
        c.loss_weights.section = 0.0;
        assert!(c.validate().is_ok());
        c.loss_weights.section = 1.0;
        assert!(c.validate().is_err());
        let c = TrainConfig {
            dropout: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            patience: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}

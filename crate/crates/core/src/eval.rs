//! Metrics and analysis protocols: macro-F1, one-vs-all ROC-AUC feature
//! strength tables, the TF-IDF probe and the leave-one-module-out ablation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::PurposeLabel;
use crate::embeddings::WordVectorTable;
use crate::features::{FEATURE_NAMES, N_HAND_FEATURES};
use crate::model::{self, ModelShape, TrainConfig, TrainingData};
use crate::tensor::{softmax, Tensor};
use crate::tfidf::SparseVector;
use crate::{Error, Result};

/// Per-class F1 over `n_classes` labels. A class that is neither predicted
/// nor present in the golds scores 0.
pub fn per_class_f1(preds: &[usize], golds: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    if preds.len() != golds.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidInput("macro-F1 of an empty set".into()));
    }
    let mut tp = vec![0usize; n_classes];
    let mut n_pred = vec![0usize; n_classes];
    let mut n_gold = vec![0usize; n_classes];
    for (&p, &g) in preds.iter().zip(golds) {
        if p >= n_classes || g >= n_classes {
            return Err(Error::InvalidInput(format!(
                "class index out of range 0..{n_classes}"
            )));
        }
        n_pred[p] += 1;
        n_gold[g] += 1;
        if p == g {
            tp[p] += 1;
        }
    }
    Ok((0..n_classes)
        .map(|c| {
            let denom = n_pred[c] + n_gold[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .collect())
}

pub fn macro_f1_indices(preds: &[usize], golds: &[usize], n_classes: usize) -> Result<f64> {
    let f1 = per_class_f1(preds, golds, n_classes)?;
    Ok(f1.iter().sum::<f64>() / n_classes as f64)
}

/// Unweighted mean of the six per-class F1 scores.
pub fn macro_f1(preds: &[PurposeLabel], golds: &[PurposeLabel]) -> Result<f64> {
    let p: Vec<usize> = preds.iter().map(|l| l.index()).collect();
    let g: Vec<usize> = golds.iter().map(|l| l.index()).collect();
    macro_f1_indices(&p, &g, PurposeLabel::COUNT)
}

/// Mann–Whitney AUC with average ranks for ties.
pub fn roc_auc(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::InvalidInput(
            "scores and labels differ in length".into(),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput(
            "ROC-AUC needs at least one positive and one negative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| positives[k]).count() as f64;
        i = j + 1;
    }
    let p = n_pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n_neg as f64))
}

pub const STRONG_POSITIVE: f64 = 0.57;
pub const STRONG_NEGATIVE: f64 = 0.43;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    StrongPositive,
    StrongNegative,
    Neutral,
}

impl Strength {
    pub fn of(auc: f64) -> Self {
        if auc > STRONG_POSITIVE {
            Strength::StrongPositive
        } else if auc < STRONG_NEGATIVE {
            Strength::StrongNegative
        } else {
            Strength::Neutral
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strength::StrongPositive => "strong_positive",
            Strength::StrongNegative => "strong_negative",
            Strength::Neutral => "neutral",
        }
    }
}

/// One row of the feature strength table. Skipped cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStrengthRow {
    pub feature: String,
    pub auc: [Option<f64>; PurposeLabel::COUNT],
    pub strength: [Option<Strength>; PurposeLabel::COUNT],
}

impl FeatureStrengthRow {
    fn from_aucs(feature: &str, auc: [Option<f64>; PurposeLabel::COUNT]) -> Self {
        Self {
            feature: feature.to_string(),
            auc,
            strength: auc.map(|a| a.map(Strength::of)),
        }
    }
}

fn one_vs_all_row(feature: &str, scores: &[f64], labels: &[PurposeLabel]) -> FeatureStrengthRow {
    let mut auc = [None; PurposeLabel::COUNT];
    for class in PurposeLabel::ALL {
        let pos: Vec<bool> = labels.iter().map(|&l| l == class).collect();
        match roc_auc(scores, &pos) {
            Ok(a) => auc[class.index()] = Some(a),
            Err(e) => log::warn!("{feature} / {class}: skipped ({e})"),
        }
    }
    FeatureStrengthRow::from_aucs(feature, auc)
}

/// One-vs-all AUC of every raw hand feature against every class.
pub fn feature_analysis(
    features: &[[f64; N_HAND_FEATURES]],
    labels: &[PurposeLabel],
) -> Result<Vec<FeatureStrengthRow>> {
    if features.len() != labels.len() {
        return Err(Error::InvalidInput(
            "feature matrix and labels differ in length".into(),
        ));
    }
    Ok(FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(f, name)| {
            let scores: Vec<f64> = features.iter().map(|row| row[f]).collect();
            one_vs_all_row(name, &scores, labels)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub val_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 50,
            learning_rate: 1e-3,
            batch_size: 16,
            val_fraction: 0.3,
        }
    }
}

/// Train a 2-layer MLP on TF-IDF vectors (grouped split by `groups`) and
/// report the one-vs-all AUC of its validation probabilities. Classes with
/// fewer than 2 validation items are skipped.
pub fn tfidf_probe(
    vectors: &[SparseVector],
    labels: &[PurposeLabel],
    groups: &[String],
    seed: u64,
    config: &ProbeConfig,
) -> Result<FeatureStrengthRow> {
    if vectors.len() != labels.len() || groups.len() != labels.len() {
        return Err(Error::InvalidInput("probe inputs differ in length".into()));
    }
    let Some(dim) = vectors.first().map(|v| v.dim) else {
        return Err(Error::InvalidInput("no TF-IDF vectors to probe".into()));
    };
    if config.hidden == 0
        || config.batch_size == 0
        || config.learning_rate.is_nan()
        || config.learning_rate <= 0.0
    {
        return Err(Error::Config(format!(
            "invalid probe configuration {config:?}"
        )));
    }

    let mut ids: Vec<&String> = groups.iter().collect();
    ids.sort();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::InvalidInput(
            "the probe needs at least two groups".into(),
        ));
    }
    crate::corpus::seeded_shuffle(&mut ids, seed);
    let n_val = crate::corpus::val_count(ids.len(), config.val_fraction);
    let val_groups: std::collections::BTreeSet<&String> = ids[..n_val].iter().copied().collect();
    let (val, train): (Vec<usize>, Vec<usize>) =
        (0..labels.len()).partition(|&i| val_groups.contains(&groups[i]));

    let mut rng = model::stream(seed, 5);
    let mut p = model::MlpParams::zeros(dim, config.hidden, PurposeLabel::COUNT);
    p.w1 = Tensor::glorot(config.hidden, dim, &mut rng);
    p.w2 = Tensor::glorot(PurposeLabel::COUNT, config.hidden, &mut rng);
    let mut adam = model::MlpAdam::new(&p);
    let input = |i: usize| model::HeadInput {
        dense: Vec::new(),
        sparse: vectors[i].entries.clone(),
    };

    let mut order = train.clone();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let mut g = model::MlpParams::zeros(dim, config.hidden, PurposeLabel::COUNT);
            for &i in chunk {
                let x = input(i);
                let (logits, cache) = model::mlp_forward(&p, &x, None);
                let mut d = softmax(&logits);
                d[labels[i].index()] -= 1.0;
                d.iter_mut().for_each(|v| *v /= chunk.len() as f64);
                model::mlp_backward(&p, &mut g, &x, None, &cache, &d, 0);
            }
            adam.step(&mut p, &g, config.learning_rate);
        }
    }

    let probs: Vec<Vec<f64>> = val
        .iter()
        .map(|&i| softmax(&model::mlp_forward(&p, &input(i), None).0))
        .collect();
    let mut auc = [None; PurposeLabel::COUNT];
    for class in PurposeLabel::ALL {
        let c = class.index();
        let pos: Vec<bool> = val.iter().map(|&i| labels[i] == class).collect();
        let n_pos = pos.iter().filter(|&&b| b).count();
        if n_pos < 2 || pos.len() - n_pos < 2 {
            log::warn!(
                "tfidf probe: class {class} has fewer than 2 validation items on one side, skipped"
            );
            continue;
        }
        let scores: Vec<f64> = probs.iter().map(|pr| pr[c]).collect();
        auc[c] = Some(roc_auc(&scores, &pos)?);
    }
    Ok(FeatureStrengthRow::from_aucs("tfidf", auc))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoHand,
    NoLstm,
    NoTfidf,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::NoHand,
        Variant::NoLstm,
        Variant::NoTfidf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoHand => "no_hand",
            Variant::NoLstm => "no_lstm",
            Variant::NoTfidf => "no_tfidf",
        }
    }

    /// The full shape with this variant's module removed.
    pub fn shape(self, full: &ModelShape) -> ModelShape {
        let mut s = *full;
        match self {
            Variant::Full => {}
            Variant::NoHand => s.n_hand = 0,
            Variant::NoLstm => s.use_lstm = false,
            Variant::NoTfidf => s.n_tfidf = 0,
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub macro_f1: f64,
    pub delta: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seed: u64,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, variant: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// The leave-one-out variant with the most negative delta.
    pub fn largest_drop(&self) -> Option<Variant> {
        self.rows
            .iter()
            .filter(|r| r.variant != Variant::Full)
            .min_by(|a, b| a.delta.total_cmp(&b.delta))
            .map(|r| r.variant)
    }
}

/// Train the full model and each leave-one-module-out variant with the same
/// seed and configuration, and report validation macro-F1. The four runs
/// execute on separate threads.
pub fn run_ablation(
    config: &TrainConfig,
    shape: &ModelShape,
    table: &WordVectorTable,
    data: TrainingData<'_>,
) -> Result<AblationReport> {
    if data.purpose_val.is_empty() {
        return Err(Error::InvalidInput(
            "ablation needs a non-empty validation split".into(),
        ));
    }
    let results: Vec<Result<(f64, usize)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = Variant::ALL
            .iter()
            .map(|&v| {
                scope.spawn(move || {
                    let vs = v.shape(shape);
                    let out = model::train(config, &vs, table, data)?;
                    let net = model::Net::new(&vs, &out.params, table);
                    Ok((
                        model::purpose_macro_f1(&net, data.purpose_val)?,
                        out.history.best_epoch,
                    ))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ablation worker panicked"))
            .collect()
    });

    let mut scored = Vec::with_capacity(4);
    for (v, r) in Variant::ALL.iter().zip(results) {
        let (f1, best_epoch) = r.map_err(|e| Error::Variant {
            variant: v.as_str().to_string(),
            source: Box::new(e),
        })?;
        scored.push((*v, f1, best_epoch));
    }
    let full = scored[0].1;
    Ok(AblationReport {
        seed: config.seed,
        rows: scored
            .into_iter()
            .map(|(variant, macro_f1, best_epoch)| AblationRow {
                variant,
                macro_f1,
                delta: macro_f1 - full,
                best_epoch,
            })
            .collect(),
    })
}

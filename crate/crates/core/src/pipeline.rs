//! End-to-end wiring: load inputs, split, fit the feature spaces on the
//! training side only, encode model items, and save or load checkpoints.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{file_sha256, RunConfig};
use crate::corpus::{
    self, grouped_split, index_split, load_citation_records, load_fulltexts, CitationRecord,
    RecordFormat, SectionExample, SplitAssignment, WorthinessExample,
};
use crate::embeddings::{
    index_tokens, load_word_vectors, EncodedTokens, TrainableVocab, WordVectorTable,
};
use crate::features::{
    extract_hand_features, fit_standardizer, standardize, HandFeatureVector, StandardizerStats,
};
use crate::model::{
    ModelParameters, ModelShape, PurposeItem, ScaffoldItem, ShapeEntry, TrainConfig, TrainingData,
};
use crate::textproc::{
    best_context_sentence, partition_sections_with, tokenize, SectionSynonyms, SectionedDocument,
};
use crate::tfidf::{fit_tfidf, l2_normalize, window_around, SparseVector, TfidfModel};
use crate::{Error, Result, TOOL_VERSION};

/// `{tool version, seed, config hash}`, carried by every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl ArtifactMeta {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            seed: cfg.seed,
            config_hash: cfg.config_hash(),
        }
    }
}

/// Everything read from disk for one run.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub records: Vec<CitationRecord>,
    /// Training-only padding records.
    pub extra: Vec<CitationRecord>,
    pub docs: HashMap<String, SectionedDocument>,
    pub worthiness: Vec<WorthinessExample>,
    pub sections: Vec<SectionExample>,
    pub table: WordVectorTable,
    pub word_vectors_sha256: String,
}

pub fn load_synonyms(cfg: &RunConfig) -> Result<SectionSynonyms> {
    match &cfg.section_synonyms {
        Some(p) => SectionSynonyms::load(&cfg.resolve(p)),
        None => Ok(SectionSynonyms::builtin().clone()),
    }
}

pub fn load_documents(cfg: &RunConfig) -> Result<HashMap<String, SectionedDocument>> {
    let Some(dir) = &cfg.fulltext_dir else {
        return Ok(HashMap::new());
    };
    let synonyms = load_synonyms(cfg)?;
    Ok(load_fulltexts(&cfg.resolve(dir))?
        .into_iter()
        .map(|(id, doc)| (id, partition_sections_with(&doc, &synonyms)))
        .collect())
}

fn load_records(path: &Path) -> Result<Vec<CitationRecord>> {
    load_citation_records(path, RecordFormat::from_path(path))
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let records = load_records(&cfg.resolve(&cfg.citations))?;
    let mut extra = Vec::new();
    for p in &cfg.extra_purpose {
        extra.extend(load_records(&cfg.resolve(p))?);
    }
    let worthiness = match &cfg.worthiness {
        Some(p) => corpus::load_worthiness_examples(&cfg.resolve(p))?,
        None => Vec::new(),
    };
    let sections = match &cfg.sections {
        Some(p) => corpus::load_section_examples(&cfg.resolve(p))?,
        None => Vec::new(),
    };
    let vectors_path = cfg.resolve(&cfg.word_vectors);
    Ok(Inputs {
        records,
        extra,
        docs: load_documents(cfg)?,
        worthiness,
        sections,
        table: load_word_vectors(&vectors_path, None)?,
        word_vectors_sha256: file_sha256(&vectors_path)?,
    })
}

/// Raw per-record features before any fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordFeatures {
    pub hand: HandFeatureVector,
    /// Sentences around the located context, or the bare context when the
    /// full text is missing or the context cannot be placed.
    pub tfidf_text: String,
    pub tokens: Vec<String>,
}

pub fn record_features(
    record: &CitationRecord,
    docs: &HashMap<String, SectionedDocument>,
) -> RecordFeatures {
    let doc = docs.get(&record.citing_paper_id);
    let window = doc.and_then(|d| {
        best_context_sentence(d, &record.citation_context).map(|i| window_around(d, i))
    });
    RecordFeatures {
        hand: extract_hand_features(record, doc),
        tfidf_text: window.unwrap_or_else(|| record.citation_context.clone()),
        tokens: tokenize(&record.citation_context),
    }
}

/// Fitted transforms that turn a record into model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub standardizer: StandardizerStats,
    pub tfidf: TfidfModel,
    pub tfidf_l2: bool,
    pub vocab: TrainableVocab,
}

impl FeatureSpace {
    pub fn tfidf_vector(&self, text: &str) -> SparseVector {
        let v = self.tfidf.transform(text);
        if self.tfidf_l2 {
            l2_normalize(&v)
        } else {
            v
        }
    }

    pub fn encode(&self, table: &WordVectorTable, tokens: &[String]) -> Result<EncodedTokens> {
        index_tokens(tokens, table, &self.vocab)
    }

    pub fn purpose_item(
        &self,
        table: &WordVectorTable,
        record: &CitationRecord,
        f: &RecordFeatures,
    ) -> Result<PurposeItem> {
        let tokens = self.encode(table, &f.tokens).map_err(|_| {
            Error::InvalidInput(format!(
                "record `{}` has a citation context without tokens",
                record.record_id
            ))
        })?;
        Ok(PurposeItem {
            tokens,
            hand: Some(standardize(&f.hand, &self.standardizer)),
            tfidf: Some(self.tfidf_vector(&f.tfidf_text)),
            label: record.label.map(|l| l.index()),
        })
    }
}

/// Model-ready data for one configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub split: SplitAssignment,
    pub space: FeatureSpace,
    pub shape: ModelShape,
    pub purpose_train: Vec<PurposeItem>,
    pub purpose_val: Vec<PurposeItem>,
    /// Indices into `Inputs::records` of the validation items, in order.
    pub val_records: Vec<usize>,
    pub worthiness_train: Vec<ScaffoldItem>,
    pub worthiness_val: Vec<ScaffoldItem>,
    pub section_train: Vec<ScaffoldItem>,
    pub section_val: Vec<ScaffoldItem>,
}

impl Prepared {
    pub fn data(&self) -> TrainingData<'_> {
        TrainingData {
            purpose_train: &self.purpose_train,
            purpose_val: &self.purpose_val,
            worthiness_train: &self.worthiness_train,
            worthiness_val: &self.worthiness_val,
            section_train: &self.section_train,
            section_val: &self.section_val,
        }
    }
}

fn scaffold_items(
    sentences: &[(&str, usize)],
    idx: &[usize],
    table: &WordVectorTable,
    vocab: &TrainableVocab,
    what: &str,
) -> Result<Vec<ScaffoldItem>> {
    idx.iter()
        .map(|&i| {
            let (sentence, label) = sentences[i];
            let tokens = index_tokens(&tokenize(sentence), table, vocab).map_err(|_| {
                Error::InvalidInput(format!("{what} example {} has no tokens", i + 1))
            })?;
            Ok(ScaffoldItem { tokens, label })
        })
        .collect()
}

/// Split, fit the standardizer, TF-IDF and trainable vocabulary on training
/// data only, and encode every item.
pub fn prepare(cfg: &RunConfig, inputs: &Inputs) -> Result<Prepared> {
    let split = grouped_split(&inputs.records, cfg.val_fraction, cfg.seed)?;
    prepare_with_split(cfg, inputs, split)
}

/// Like [`prepare`] but with every record on the training side.
pub fn prepare_all_train(cfg: &RunConfig, inputs: &Inputs) -> Result<Prepared> {
    if let Some(r) = inputs.records.iter().find(|r| r.label.is_none()) {
        return Err(Error::InvalidInput(format!(
            "record `{}` is unlabeled",
            r.record_id
        )));
    }
    let split = SplitAssignment {
        train_ids: inputs.records.iter().map(|r| r.record_id.clone()).collect(),
        val_ids: Default::default(),
        seed: cfg.seed,
    };
    prepare_with_split(cfg, inputs, split)
}

pub fn prepare_with_split(
    cfg: &RunConfig,
    inputs: &Inputs,
    split: SplitAssignment,
) -> Result<Prepared> {
    if let Some(r) = inputs.extra.iter().find(|r| r.label.is_none()) {
        return Err(Error::InvalidInput(format!(
            "extra record `{}` is unlabeled",
            r.record_id
        )));
    }
    let features: Vec<RecordFeatures> = inputs
        .records
        .iter()
        .map(|r| record_features(r, &inputs.docs))
        .collect();
    let extra_features: Vec<RecordFeatures> = inputs
        .extra
        .iter()
        .map(|r| record_features(r, &inputs.docs))
        .collect();
    let missing = inputs
        .records
        .iter()
        .filter(|r| !inputs.docs.contains_key(&r.citing_paper_id))
        .count();
    if missing > 0 {
        log::warn!(
            "{missing} of {} records have no full text",
            inputs.records.len()
        );
    }

    let mut train: Vec<(&CitationRecord, &RecordFeatures)> = Vec::new();
    let mut val_records = Vec::new();
    for (i, (r, f)) in inputs.records.iter().zip(&features).enumerate() {
        if split.val_ids.contains(&r.record_id) {
            val_records.push(i);
        } else {
            train.push((r, f));
        }
    }
    train.extend(inputs.extra.iter().zip(&extra_features));

    let hand: Vec<HandFeatureVector> = train.iter().map(|(_, f)| f.hand).collect();
    let standardizer = fit_standardizer(&hand)?;
    let texts: Vec<&str> = train.iter().map(|(_, f)| f.tfidf_text.as_str()).collect();
    let tfidf = fit_tfidf(&texts, cfg.tfidf_max_features)?;

    let worth: Vec<(&str, usize)> = inputs
        .worthiness
        .iter()
        .map(|w| (w.sentence.as_str(), usize::from(w.has_citation)))
        .collect();
    let sect: Vec<(&str, usize)> = inputs
        .sections
        .iter()
        .map(|s| (s.sentence.as_str(), s.section_label.index()))
        .collect();
    let (w_train, w_val) = index_split(worth.len(), cfg.scaffold_val_fraction, cfg.seed);
    let (s_train, s_val) = index_split(sect.len(), cfg.scaffold_val_fraction, cfg.seed);

    let mut vocab_tokens: Vec<String> = train
        .iter()
        .flat_map(|(_, f)| f.tokens.iter().cloned())
        .collect();
    for (data, idx) in [(&worth, &w_train), (&sect, &s_train)] {
        vocab_tokens.extend(idx.iter().flat_map(|&i| tokenize(data[i].0)));
    }
    let vocab = TrainableVocab::build(vocab_tokens.iter().map(String::as_str));

    let space = FeatureSpace {
        standardizer,
        tfidf,
        tfidf_l2: cfg.tfidf_l2,
        vocab,
    };
    let table = &inputs.table;
    let purpose_train = train
        .iter()
        .map(|(r, f)| space.purpose_item(table, r, f))
        .collect::<Result<Vec<_>>>()?;
    let purpose_val = val_records
        .iter()
        .map(|&i| space.purpose_item(table, &inputs.records[i], &features[i]))
        .collect::<Result<Vec<_>>>()?;
    let shape = model_shape(&cfg.train, table, &space);
    Ok(Prepared {
        split,
        shape,
        purpose_train,
        purpose_val,
        val_records,
        worthiness_train: scaffold_items(&worth, &w_train, table, &space.vocab, "worthiness")?,
        worthiness_val: scaffold_items(&worth, &w_val, table, &space.vocab, "worthiness")?,
        section_train: scaffold_items(&sect, &s_train, table, &space.vocab, "section")?,
        section_val: scaffold_items(&sect, &s_val, table, &space.vocab, "section")?,
        space,
    })
}

pub fn model_shape(
    train: &TrainConfig,
    table: &WordVectorTable,
    space: &FeatureSpace,
) -> ModelShape {
    ModelShape {
        d_static: table.dim(),
        d_trainable: train.d_trainable,
        vocab_rows: space.vocab.rows(),
        h_lstm: train.h_lstm,
        hidden: train.hidden,
        n_hand: crate::features::N_HAND_FEATURES,
        n_tfidf: space.tfidf.dim(),
        use_lstm: true,
    }
}

/// The static vectors a checkpoint was trained with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordVectorRef {
    /// As written in the config.
    pub path: String,
    pub sha256: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub meta: ArtifactMeta,
    pub word_vectors: WordVectorRef,
    pub shape: ModelShape,
    pub shape_table: Vec<ShapeEntry>,
    pub train: TrainConfig,
    pub best_epoch: usize,
    pub features: FeatureSpace,
    pub params: ModelParameters,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Load and check that every tensor matches the recorded shape.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        ck.shape.validate()?;
        let expected = ModelParameters::zeros(&ck.shape).shape_table();
        if ck.shape_table != expected || ck.params.shape_table() != expected {
            return Err(Error::Schema(format!(
                "{}: parameter shapes do not match the recorded model shape",
                path.display()
            )));
        }
        if let Some((name, _)) = ck
            .params
            .tensors()
            .into_iter()
            .find(|(_, t)| t.data.len() != t.rows * t.cols)
        {
            return Err(Error::Schema(format!(
                "{}: tensor {name} has the wrong element count",
                path.display()
            )));
        }
        if ck.features.vocab.rows() != ck.shape.vocab_rows
            || (ck.shape.n_tfidf != 0 && ck.features.tfidf.dim() != ck.shape.n_tfidf)
        {
            return Err(Error::Schema(format!(
                "{}: feature space does not match the model shape",
                path.display()
            )));
        }
        Ok(ck)
    }

    /// Fail unless `table` is the static table this checkpoint expects.
    pub fn check_word_vectors(&self, sha256: &str, table: &WordVectorTable) -> Result<()> {
        if sha256 != self.word_vectors.sha256 || table.dim() != self.word_vectors.dim {
            return Err(Error::Schema(format!(
                "word vectors differ from the ones the checkpoint was trained with ({})",
                self.word_vectors.path
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PurposeLabel;
    use crate::textproc::partition_sections;

    fn record(id: &str, paper: &str, ctx: &str) -> CitationRecord {
        CitationRecord {
            record_id: id.into(),
            citing_paper_id: paper.into(),
            citing_title: "t".into(),
            citing_author: "a".into(),
            cited_title: "u".into(),
            cited_author: "Smith".into(),
            citation_context: ctx.into(),
            label: Some(PurposeLabel::Uses),
        }
    }

    #[test]
    fn tfidf_text_uses_the_window_when_a_document_exists() {
        let doc = partition_sections(&corpus::FullTextDocument {
            citing_paper_id: "p".into(),
            raw_text: "First one here. We use the parser of Smith. Last one here.".into(),
        });
        let docs = HashMap::from([("p".to_string(), doc)]);
        let f = record_features(&record("r", "p", "use the parser"), &docs);
        assert_eq!(
            f.tfidf_text,
            "First one here. We use the parser of Smith. Last one here."
        );
        let f = record_features(&record("r", "q", "use the parser"), &docs);
        assert_eq!(f.tfidf_text, "use the parser");
        assert_eq!(f.tokens, ["use", "the", "parser"]);
    }
}

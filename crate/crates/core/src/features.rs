//! The nine hand-generated features and their standardization.

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::CitationRecord;
use crate::textproc::{self, CitationOccurrence, Section, SectionedDocument};
use crate::{Error, Result};

const CONTRAST_VOCAB: &str = include_str!("../data/contrast_vocab.txt");

pub const N_HAND_FEATURES: usize = 9;

/// Column names in vector order.
pub const FEATURE_NAMES: [&str; N_HAND_FEATURES] = [
    "n_cit_full",
    "n_cit_intro",
    "n_cit_methods",
    "n_cit_results",
    "n_cit_discussion",
    "rel_pos_context",
    "rel_pos_first",
    "contrast_vocab_flag",
    "title_overlap",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandFeatureVector {
    pub n_cit_full: f64,
    pub n_cit_intro: f64,
    pub n_cit_methods: f64,
    pub n_cit_results: f64,
    pub n_cit_discussion: f64,
    pub rel_pos_context: f64,
    pub rel_pos_first: f64,
    pub contrast_vocab_flag: f64,
    pub title_overlap: f64,
}

impl HandFeatureVector {
    pub fn to_array(&self) -> [f64; N_HAND_FEATURES] {
        [
            self.n_cit_full,
            self.n_cit_intro,
            self.n_cit_methods,
            self.n_cit_results,
            self.n_cit_discussion,
            self.rel_pos_context,
            self.rel_pos_first,
            self.contrast_vocab_flag,
            self.title_overlap,
        ]
    }

    pub fn from_array(a: [f64; N_HAND_FEATURES]) -> Self {
        Self {
            n_cit_full: a[0],
            n_cit_intro: a[1],
            n_cit_methods: a[2],
            n_cit_results: a[3],
            n_cit_discussion: a[4],
            rel_pos_context: a[5],
            rel_pos_first: a[6],
            contrast_vocab_flag: a[7],
            title_overlap: a[8],
        }
    }
}

/// Citation counts: (full, intro, methods, results, discussion).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SectionCounts {
    pub full: usize,
    pub introduction: usize,
    pub methods: usize,
    pub results: usize,
    pub discussion: usize,
}

/// Occurrences in [`Section::Other`] count only toward `full`.
pub fn section_citation_counts(occurrences: &[CitationOccurrence]) -> SectionCounts {
    let mut counts = SectionCounts {
        full: occurrences.len(),
        ..Default::default()
    };
    for occ in occurrences {
        match occ.section {
            Section::Introduction => counts.introduction += 1,
            Section::Methods => counts.methods += 1,
            Section::Results => counts.results += 1,
            Section::Discussion => counts.discussion += 1,
            Section::Other => {}
        }
    }
    counts
}

/// `(index + 1) / sentence_count` for the context sentence and for the
/// earliest occurrence.
pub fn relative_positions(
    occurrences: &[CitationOccurrence],
    context_sentence_index: usize,
    sentence_count: usize,
) -> Result<(f64, f64)> {
    let first = occurrences
        .iter()
        .map(|o| o.sentence_index)
        .min()
        .ok_or_else(|| {
            Error::InvalidInput("relative positions need at least one occurrence".into())
        })?;
    if sentence_count == 0 || context_sentence_index >= sentence_count || first >= sentence_count {
        return Err(Error::InvalidInput(format!(
            "sentence index out of range for a {sentence_count}-sentence document"
        )));
    }
    let n = sentence_count as f64;
    Ok((
        (context_sentence_index + 1) as f64 / n,
        (first + 1) as f64 / n,
    ))
}

/// The shipped contrast vocabulary, each entry tokenized.
pub fn contrast_vocabulary() -> &'static [Vec<String>] {
    static VOCAB: OnceLock<Vec<Vec<String>>> = OnceLock::new();
    VOCAB.get_or_init(|| {
        CONTRAST_VOCAB
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(textproc::tokenize)
            .collect()
    })
}

/// 1 when any vocabulary entry appears in the context as a whole token, or for
/// multiword entries as a consecutive token sequence.
pub fn contrast_vocab_flag(context: &str) -> f64 {
    let tokens = textproc::tokenize(context);
    let hit = contrast_vocabulary()
        .iter()
        .any(|entry| tokens.windows(entry.len()).any(|w| w == entry.as_slice()));
    if hit {
        1.0
    } else {
        0.0
    }
}

fn content_tokens(title: &str) -> BTreeSet<String> {
    textproc::tokenize(title)
        .into_iter()
        .filter(|t| !textproc::is_stop_word(t))
        .collect()
}

/// Number of distinct non-stop-word tokens shared by the two titles.
pub fn title_overlap(citing_title: &str, cited_title: &str) -> usize {
    content_tokens(citing_title)
        .intersection(&content_tokens(cited_title))
        .count()
}

/// Compute the nine features. Without a full text the seven count and
/// position features are zero.
pub fn extract_hand_features(
    record: &CitationRecord,
    doc: Option<&SectionedDocument>,
) -> HandFeatureVector {
    let flag = contrast_vocab_flag(&record.citation_context);
    let overlap = title_overlap(&record.citing_title, &record.cited_title) as f64;
    let mut v = HandFeatureVector::from_array([0.0; N_HAND_FEATURES]);
    v.contrast_vocab_flag = flag;
    v.title_overlap = overlap;

    let Some(doc) = doc.filter(|d| d.sentence_count() > 0) else {
        return v;
    };
    let Ok(occurrences) =
        textproc::locate_citation_occurrences(doc, &record.cited_author, &record.citation_context)
    else {
        return v;
    };
    let counts = section_citation_counts(&occurrences);
    v.n_cit_full = counts.full as f64;
    v.n_cit_intro = counts.introduction as f64;
    v.n_cit_methods = counts.methods as f64;
    v.n_cit_results = counts.results as f64;
    v.n_cit_discussion = counts.discussion as f64;

    if let Some(ctx) = textproc::best_context_sentence(doc, &record.citation_context) {
        if let Ok((rel_ctx, rel_first)) =
            relative_positions(&occurrences, ctx, doc.sentence_count())
        {
            v.rel_pos_context = rel_ctx;
            v.rel_pos_first = rel_first;
        }
    }
    v
}

/// Features for many records, plus the ids of records whose full text was
/// missing.
#[derive(Debug, Clone, Default)]
pub struct FeaturizeOutcome {
    pub vectors: Vec<HandFeatureVector>,
    pub missing_fulltext: Vec<String>,
}

pub fn featurize_records(
    records: &[CitationRecord],
    docs: &HashMap<String, SectionedDocument>,
) -> FeaturizeOutcome {
    let mut out = FeaturizeOutcome::default();
    for record in records {
        let doc = docs.get(&record.citing_paper_id);
        if doc.is_none() {
            out.missing_fulltext.push(record.record_id.clone());
        }
        out.vectors.push(extract_hand_features(record, doc));
    }
    if !out.missing_fulltext.is_empty() {
        log::warn!(
            "{} of {} records have no full text; count and position features are zero for them",
            out.missing_fulltext.len(),
            records.len()
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerStats {
    pub mean: [f64; N_HAND_FEATURES],
    pub std: [f64; N_HAND_FEATURES],
    /// Features with zero variance on the fitting set; they standardize to 0.
    pub constant: [bool; N_HAND_FEATURES],
}

/// Per-feature mean and population standard deviation.
pub fn fit_standardizer(vectors: &[HandFeatureVector]) -> Result<StandardizerStats> {
    if vectors.is_empty() {
        return Err(Error::InvalidInput(
            "cannot fit a standardizer on zero vectors".into(),
        ));
    }
    let n = vectors.len() as f64;
    let mut mean = [0.0; N_HAND_FEATURES];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v.to_array()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; N_HAND_FEATURES];
    for v in vectors {
        for ((s, x), m) in var.iter_mut().zip(v.to_array()).zip(mean) {
            *s += (x - m) * (x - m);
        }
    }
    let std = var.map(|s| (s / n).sqrt());
    let constant = std.map(|s| s <= 1e-12);
    Ok(StandardizerStats {
        mean,
        std,
        constant,
    })
}

pub fn standardize(v: &HandFeatureVector, stats: &StandardizerStats) -> [f64; N_HAND_FEATURES] {
    let x = v.to_array();
    std::array::from_fn(|i| {
        if stats.constant[i] {
            0.0
        } else {
            (x[i] - stats.mean[i]) / stats.std[i]
        }
    })
}

//! TF-IDF over citation contexts widened by their neighbouring sentences.
//!
//! `idf(t) = ln((1 + n) / (1 + df(t))) + 1` and the value of column `t` for a
//! text is the raw count of `t` in that text times `idf(t)`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::textproc::{tokenize, CitationOccurrence, SectionedDocument};
use crate::{Error, Result};

pub const DEFAULT_MAX_FEATURES: usize = 5000;

/// Sentences `i-1`, `i`, `i+1` around an occurrence, clamped to the document
/// and joined by single spaces.
pub fn context_window(doc: &SectionedDocument, occurrence: &CitationOccurrence) -> String {
    window_around(doc, occurrence.sentence_index)
}

pub fn window_around(doc: &SectionedDocument, index: usize) -> String {
    let n = doc.sentence_count();
    if n == 0 {
        return String::new();
    }
    let index = index.min(n - 1);
    let lo = index.saturating_sub(1);
    let hi = (index + 1).min(n - 1);
    (lo..=hi)
        .map(|i| doc.sentence_text(i))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    /// Strictly increasing indices.
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&(_, v)| v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TfidfFile", try_from = "TfidfFile")]
pub struct TfidfModel {
    vocabulary: HashMap<String, usize>,
    /// Indexed by column.
    tokens: Vec<String>,
    df: Vec<usize>,
    idf: Vec<f64>,
    n: usize,
    max_features: usize,
}

pub fn idf(n: usize, df: usize) -> f64 {
    ((1.0 + n as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Fit on `texts`. The `max_features` tokens with the highest document
/// frequency are kept, ties broken lexicographically; columns are numbered in
/// lexicographic token order.
pub fn fit_tfidf<S: AsRef<str>>(texts: &[S], max_features: usize) -> Result<TfidfModel> {
    if texts.is_empty() {
        return Err(Error::InvalidInput(
            "cannot fit TF-IDF on an empty corpus".into(),
        ));
    }
    if max_features == 0 {
        return Err(Error::Config("max_features must be at least 1".into()));
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for text in texts {
        let distinct: HashSet<String> = tokenize(text.as_ref()).into_iter().collect();
        for token in distinct {
            *df.entry(token).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = df.into_iter().collect();
    // BTreeMap order is already lexicographic; a stable sort keeps it for ties.
    ranked.sort_by_key(|e| std::cmp::Reverse(e.1));
    ranked.truncate(max_features);
    ranked.sort_by(|a, b| a.0.cmp(&b.0));
    TfidfModel::from_entries(texts.len(), max_features, ranked)
}

impl TfidfModel {
    fn from_entries(n: usize, max_features: usize, entries: Vec<(String, usize)>) -> Result<Self> {
        let mut vocabulary = HashMap::with_capacity(entries.len());
        let mut tokens = Vec::with_capacity(entries.len());
        let mut dfs = Vec::with_capacity(entries.len());
        for (i, (token, df)) in entries.into_iter().enumerate() {
            if df == 0 || df > n {
                return Err(Error::Schema(format!(
                    "document frequency {df} of `{token}` outside 1..={n}"
                )));
            }
            if vocabulary.insert(token.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate TF-IDF token `{token}`")));
            }
            tokens.push(token);
            dfs.push(df);
        }
        let idf = dfs.iter().map(|&d| idf(n, d)).collect();
        Ok(Self {
            vocabulary,
            tokens,
            df: dfs,
            idf,
            n,
            max_features,
        })
    }

    pub fn dim(&self) -> usize {
        self.tokens.len()
    }

    pub fn n_documents(&self) -> usize {
        self.n
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.vocabulary.get(token).copied()
    }

    pub fn token(&self, column: usize) -> &str {
        &self.tokens[column]
    }

    pub fn df(&self, token: &str) -> Option<usize> {
        self.column(token).map(|c| self.df[c])
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.column(token).map(|c| self.idf[c])
    }

    /// Raw TF-IDF of `text`; tokens outside the vocabulary are ignored.
    pub fn transform(&self, text: &str) -> SparseVector {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for token in tokenize(text) {
            if let Some(c) = self.column(&token) {
                *counts.entry(c).or_default() += 1;
            }
        }
        SparseVector {
            dim: self.dim(),
            entries: counts
                .into_iter()
                .map(|(c, tf)| (c, tf as f64 * self.idf[c]))
                .collect(),
        }
    }

    pub fn to_file(&self) -> TfidfFile {
        TfidfFile {
            n: self.n,
            max_features: self.max_features,
            entries: self
                .tokens
                .iter()
                .zip(&self.df)
                .enumerate()
                .map(|(index, (token, &df))| TfidfEntry {
                    token: token.clone(),
                    df,
                    index,
                })
                .collect(),
        }
    }

    pub fn from_file(file: TfidfFile) -> Result<Self> {
        let mut entries = file.entries;
        entries.sort_by_key(|e| e.index);
        for (expected, e) in entries.iter().enumerate() {
            if e.index != expected {
                return Err(Error::Schema(format!(
                    "TF-IDF column indices must be 0..V without gaps (missing {expected})"
                )));
            }
        }
        Self::from_entries(
            file.n,
            file.max_features,
            entries.into_iter().map(|e| (e.token, e.df)).collect(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_file(serde_json::from_str(&json)?)
    }
}

/// On-disk form of a fitted model (`tfidf.json`).
impl From<TfidfModel> for TfidfFile {
    fn from(m: TfidfModel) -> Self {
        m.to_file()
    }
}

impl TryFrom<TfidfFile> for TfidfModel {
    type Error = Error;

    fn try_from(f: TfidfFile) -> Result<Self> {
        TfidfModel::from_file(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfFile {
    pub n: usize,
    pub max_features: usize,
    pub entries: Vec<TfidfEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfEntry {
    pub token: String,
    pub df: usize,
    pub index: usize,
}

/// Scale to unit Euclidean norm; the zero vector is returned unchanged.
pub fn l2_normalize(v: &SparseVector) -> SparseVector {
    let norm = v.norm();
    if norm == 0.0 {
        return v.clone();
    }
    SparseVector {
        dim: v.dim,
        entries: v.entries.iter().map(|&(i, x)| (i, x / norm)).collect(),
    }
}

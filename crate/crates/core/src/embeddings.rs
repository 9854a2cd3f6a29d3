//! Static word vectors in the plain-text format (`token v1 v2 ... vd` per
//! line) and the trainable second embedding channel.
//!
//! A token is encoded as `[static(token) ; trainable(token)]`. The static
//! channel is frozen; the trainable channel stands in for contextualized
//! embeddings and is updated by the training loop.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Initialization range of trainable rows.
pub const TRAINABLE_INIT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    index: HashMap<String, usize>,
    /// One row per loaded token followed by the UNK row.
    matrix: Tensor,
}

impl WordVectorTable {
    /// Build from `(token, vector)` pairs. The UNK vector is the component-wise
    /// mean, accumulated in lexicographic token order so the result does not
    /// depend on input order.
    pub fn from_pairs(pairs: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = pairs.first().map_or(0, |(_, v)| v.len());
        let mut sorted: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (token, v) in pairs {
            if v.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "vector for `{token}` has {} components, expected {dim}",
                    v.len()
                )));
            }
            if sorted.insert(token.clone(), v).is_some() {
                return Err(Error::InvalidInput(format!("duplicate token `{token}`")));
            }
        }
        let n = sorted.len();
        let mut data = Vec::with_capacity((n + 1) * dim);
        let mut unk = vec![0.0; dim];
        let mut index = HashMap::with_capacity(n);
        for (i, (token, v)) in sorted.into_iter().enumerate() {
            for (u, x) in unk.iter_mut().zip(&v) {
                *u += x;
            }
            data.extend_from_slice(&v);
            index.insert(token, i);
        }
        if n > 0 {
            unk.iter_mut().for_each(|u| *u /= n as f64);
        }
        data.extend_from_slice(&unk);
        Ok(Self {
            index,
            matrix: Tensor::from_vec(n + 1, dim, data),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols
    }

    /// Number of loaded tokens (UNK excluded).
    pub fn len(&self) -> usize {
        self.matrix.rows - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unk_row(&self) -> usize {
        self.len()
    }

    /// Row of `token`, or the UNK row.
    pub fn row_index(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(self.unk_row())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        self.matrix.row(row)
    }

    pub fn lookup(&self, token: &str) -> &[f64] {
        self.row(self.row_index(token))
    }

    pub fn unk(&self) -> &[f64] {
        self.row(self.unk_row())
    }
}

/// Load a whitespace-separated text embedding file. Blank lines are skipped;
/// numbers are parsed as decimal `f64`.
pub fn load_word_vectors(path: &Path, expected_dim: Option<usize>) -> Result<WordVectorTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    let mut dim: Option<usize> = expected_dim;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(path, line_no, format!("invalid number `{f}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(Error::parse(
                path,
                line_no,
                format!("token `{token}` has no vector"),
            ));
        }
        match dim {
            Some(d) if d != values.len() => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected {d} components, found {}", values.len()),
                ))
            }
            None => dim = Some(values.len()),
            _ => {}
        }
        pairs.push((token.to_string(), values));
    }
    if pairs.is_empty() {
        return Err(Error::parse(path, 0, "no word vectors found"));
    }
    WordVectorTable::from_pairs(pairs).map_err(|e| Error::parse(path, 0, e.to_string()))
}

/// Token vocabulary of the trainable channel. Row 0 is UNK; known tokens
/// follow in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct TrainableVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for TrainableVocab {
    fn from(tokens: Vec<String>) -> Self {
        Self::from_tokens(tokens)
    }
}

impl From<TrainableVocab> for Vec<String> {
    fn from(v: TrainableVocab) -> Self {
        v.tokens
    }
}

impl TrainableVocab {
    pub const UNK_ROW: usize = 0;

    pub fn build<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> Self {
        let set: BTreeSet<&str> = tokens.into_iter().collect();
        Self::from_tokens(set.into_iter().map(str::to_string).collect())
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i + 1))
            .collect();
        Self { tokens, index }
    }

    /// Rows including UNK.
    pub fn rows(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn row_index(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK_ROW)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainableEmbedding {
    pub vocab: TrainableVocab,
    pub matrix: Tensor,
    pub trainable: bool,
}

impl TrainableEmbedding {
    /// Rows drawn uniformly from `[-0.05, 0.05]` with a generator seeded by
    /// `seed`.
    pub fn new(vocab: TrainableVocab, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matrix = Tensor::uniform(vocab.rows(), dim, TRAINABLE_INIT, &mut rng);
        Self {
            vocab,
            matrix,
            trainable: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols
    }

    pub fn lookup(&self, token: &str) -> &[f64] {
        self.matrix.row(self.vocab.row_index(token))
    }
}

/// Row indices of a token sequence in both channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedTokens {
    pub static_rows: Vec<usize>,
    pub trainable_rows: Vec<usize>,
}

impl EncodedTokens {
    pub fn len(&self) -> usize {
        self.static_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.static_rows.is_empty()
    }
}

pub fn index_tokens<S: AsRef<str>>(
    tokens: &[S],
    table: &WordVectorTable,
    vocab: &TrainableVocab,
) -> Result<EncodedTokens> {
    if tokens.is_empty() {
        return Err(Error::InvalidInput(
            "cannot encode an empty token sequence".into(),
        ));
    }
    Ok(EncodedTokens {
        static_rows: tokens.iter().map(|t| table.row_index(t.as_ref())).collect(),
        trainable_rows: tokens.iter().map(|t| vocab.row_index(t.as_ref())).collect(),
    })
}

/// Per-token input vectors `[static ; trainable]`.
pub fn encode_tokens<S: AsRef<str>>(
    tokens: &[S],
    table: &WordVectorTable,
    trainable: &TrainableEmbedding,
) -> Result<Vec<Vec<f64>>> {
    let idx = index_tokens(tokens, table, &trainable.vocab)?;
    Ok(gather_inputs(&idx, table, &trainable.matrix))
}

pub(crate) fn gather_inputs(
    idx: &EncodedTokens,
    table: &WordVectorTable,
    trainable: &Tensor,
) -> Vec<Vec<f64>> {
    idx.static_rows
        .iter()
        .zip(&idx.trainable_rows)
        .map(|(&s, &t)| {
            let mut v = Vec::with_capacity(table.dim() + trainable.cols);
            v.extend_from_slice(table.row(s));
            v.extend_from_slice(trainable.row(t));
            v
        })
        .collect()
}

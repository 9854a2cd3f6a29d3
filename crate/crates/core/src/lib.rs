//! Citation purpose classification.
//!
//! The crate combines three feature modules for classifying the purpose of a
//! citation context into one of six classes:
//!
//! - nine hand-generated scalar features computed from the citing paper's full
//!   text and the citation metadata ([`features`]),
//! - TF-IDF vectors over the citation sentence and its neighbours ([`tfidf`]),
//! - a bidirectional LSTM with additive attention over word vectors
//!   ([`embeddings`], [`model`]).
//!
//! The three are concatenated into a multi-layer perceptron and trained jointly
//! with two auxiliary scaffold tasks (citation worthiness and section
//! prediction). [`eval`] holds the metrics, the one-vs-all ROC-AUC feature
//! analysis and the leave-one-module-out ablation runner.

pub mod config;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod pipeline;
pub mod tensor;
pub mod textproc;
pub mod tfidf;

pub use error::{Error, Result};

/// Crate version embedded in every emitted artifact.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

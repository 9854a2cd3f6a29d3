//! Run configuration: one JSON file naming every input and hyperparameter.
//!
//! Relative paths are resolved against the directory holding the config file.
//! The serialized form keeps them as written, so artifacts do not depend on
//! where the repository is checked out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eval::ProbeConfig;
use crate::model::TrainConfig;
use crate::tfidf::DEFAULT_MAX_FEATURES;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Labeled (or unlabeled, for prediction) citation records, JSONL or CSV.
    pub citations: PathBuf,
    #[serde(default)]
    pub fulltext_dir: Option<PathBuf>,
    #[serde(default)]
    pub worthiness: Option<PathBuf>,
    #[serde(default)]
    pub sections: Option<PathBuf>,
    pub word_vectors: PathBuf,
    /// Additional labeled records used for training only.
    #[serde(default)]
    pub extra_purpose: Vec<PathBuf>,
    /// Replaces the built-in header synonym table.
    #[serde(default)]
    pub section_synonyms: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default = "default_val_fraction")]
    pub scaffold_val_fraction: f64,
    #[serde(default = "default_max_features")]
    pub tfidf_max_features: usize,
    #[serde(default = "default_true")]
    pub tfidf_l2: bool,
    /// `train.seed` is always overwritten by the top-level `seed`.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    13
}

fn default_val_fraction() -> f64 {
    0.2
}

fn default_max_features() -> usize {
    DEFAULT_MAX_FEATURES
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    /// Parse and validate a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if value.pointer("/train/seed").is_some() {
            return Err(Error::Config(format!(
                "{}: set the seed at the top level, not under `train`",
                path.display()
            )));
        }
        let mut cfg: RunConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.set_seed(cfg.seed);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Build a config in memory; paths are resolved against `base_dir`.
    pub fn with_base_dir(mut self, base_dir: impl Into<PathBuf>) -> Self {
        self.base_dir = base_dir.into();
        self
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }

    /// Absolute (or base-relative) form of a configured path.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Check value ranges and that every input path exists.
    pub fn validate(&self) -> Result<()> {
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if !(self.scaffold_val_fraction > 0.0 && self.scaffold_val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "scaffold_val_fraction must lie in (0, 1), got {}",
                self.scaffold_val_fraction
            )));
        }
        if self.tfidf_max_features == 0 {
            return Err(Error::Config(
                "tfidf_max_features must be at least 1".into(),
            ));
        }
        if self.train.seed != self.seed {
            return Err(Error::Config("train.seed differs from the run seed".into()));
        }
        self.train.validate()?;
        let mut inputs: Vec<(&str, &Path)> = vec![
            ("citations", &self.citations),
            ("word_vectors", &self.word_vectors),
        ];
        for (name, p) in [
            ("fulltext_dir", &self.fulltext_dir),
            ("worthiness", &self.worthiness),
            ("sections", &self.sections),
            ("section_synonyms", &self.section_synonyms),
        ] {
            if let Some(p) = p {
                inputs.push((name, p));
            }
        }
        inputs.extend(
            self.extra_purpose
                .iter()
                .map(|p| ("extra_purpose", p.as_path())),
        );
        for (name, p) in inputs {
            let full = self.resolve(p);
            if !full.exists() {
                return Err(Error::Config(format!(
                    "{name}: {} does not exist",
                    full.display()
                )));
            }
        }
        if let Some(dir) = &self.fulltext_dir {
            if !self.resolve(dir).is_dir() {
                return Err(Error::Config(format!(
                    "fulltext_dir: {} is not a directory",
                    dir.display()
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form with the output directory blanked,
    /// so the same experiment written to two places hashes the same.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex_digest(&json)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex_digest(&bytes))
}

//! Subcommands of the `citepurpose` binary. Each command reads one JSON run
//! config, optionally overridden by `--seed` and `--out`, and writes its
//! artifacts to the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use citepurpose::config::RunConfig;
use citepurpose::corpus::{
    grouped_split, load_citation_records, CitationRecord, PurposeLabel, RecordFormat,
};
use citepurpose::eval::{self, FeatureStrengthRow, Variant};
use citepurpose::features::FEATURE_NAMES;
use citepurpose::model::{self, Net};
use citepurpose::pipeline::{self, ArtifactMeta, Checkpoint, WordVectorRef};
use citepurpose::tfidf::{fit_tfidf, l2_normalize};
use citepurpose::TOOL_VERSION;

#[derive(Debug, Parser)]
#[command(
    name = "citepurpose",
    version,
    about = "Citation purpose classification"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report errors on standard error as a JSON object.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the config and inputs and print a summary.
    Validate,
    /// Write hand features and the fitted TF-IDF model.
    Featurize,
    /// Train and write a checkpoint and the training history.
    Train,
    /// Predict purpose labels for a record file.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Records to label; defaults to the configured citations.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Score a checkpoint on the validation split or on labeled records.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Leave-one-module-out ablation.
    Ablate,
    /// Per-feature one-vs-all ROC-AUC and the TF-IDF probe.
    AnalyzeFeatures,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] citepurpose::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration and schema problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_schema_error() => 2,
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            _ => "runtime",
        }
    }

    /// `{"error": {"kind", "message", "exit_code"}}`
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {"kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code()}
        })
        .to_string()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Load the config named by `--config` and apply overrides.
pub fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &cli.out {
        let cwd = std::env::current_dir().map_err(io_err(Path::new(".")))?;
        cfg.output_dir = cwd.join(out);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Dispatch a parsed command line. Returns the paths written.
pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Validate => cmd_validate(&cfg).map(|report| {
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Vec::new()
        }),
        Command::Featurize => cmd_featurize(&cfg),
        Command::Train => cmd_train(&cfg),
        Command::Predict { checkpoint, input } => {
            cmd_predict(&cfg, checkpoint.as_deref(), input.as_deref())
        }
        Command::Evaluate { checkpoint, input } => {
            cmd_evaluate(&cfg, checkpoint.as_deref(), input.as_deref())
        }
        Command::Ablate => cmd_ablate(&cfg),
        Command::AnalyzeFeatures => cmd_analyze_features(&cfg),
    }
}

fn out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = cfg.output_path();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io_err(path))
}

/// CSV writer whose first line is a `#` comment carrying the artifact metadata.
fn csv_writer(path: &Path, meta: &ArtifactMeta) -> CliResult<csv::Writer<fs::File>> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    writeln!(
        file,
        "# citepurpose {} seed={} config_hash={}",
        meta.tool_version, meta.seed, meta.config_hash
    )
    .map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

#[derive(Debug, Serialize)]
pub struct ValidateReport {
    pub meta: ArtifactMeta,
    pub records: usize,
    pub labeled: usize,
    pub label_counts: BTreeMap<String, usize>,
    pub citing_papers: usize,
    pub fulltexts: usize,
    pub records_without_fulltext: usize,
    pub extra_records: usize,
    pub worthiness_examples: usize,
    pub section_examples: usize,
    pub word_vectors: usize,
    pub word_vector_dim: usize,
    pub train_records: Option<usize>,
    pub val_records: Option<usize>,
}

pub fn cmd_validate(cfg: &RunConfig) -> CliResult<ValidateReport> {
    let inputs = pipeline::load_inputs(cfg)?;
    let labeled = inputs.records.iter().filter(|r| r.label.is_some()).count();
    let mut label_counts = BTreeMap::new();
    for r in &inputs.records {
        if let Some(l) = r.label {
            *label_counts.entry(l.as_str().to_string()).or_insert(0) += 1;
        }
    }
    let papers: std::collections::BTreeSet<&str> = inputs
        .records
        .iter()
        .map(|r| r.citing_paper_id.as_str())
        .collect();
    let split = if labeled == inputs.records.len() {
        Some(grouped_split(&inputs.records, cfg.val_fraction, cfg.seed)?)
    } else {
        None
    };
    Ok(ValidateReport {
        meta: ArtifactMeta::new(cfg),
        records: inputs.records.len(),
        labeled,
        label_counts,
        citing_papers: papers.len(),
        fulltexts: inputs.docs.len(),
        records_without_fulltext: inputs
            .records
            .iter()
            .filter(|r| !inputs.docs.contains_key(&r.citing_paper_id))
            .count(),
        extra_records: inputs.extra.len(),
        worthiness_examples: inputs.worthiness.len(),
        section_examples: inputs.sections.len(),
        word_vectors: inputs.table.len(),
        word_vector_dim: inputs.table.dim(),
        train_records: split.as_ref().map(|s| s.train_ids.len()),
        val_records: split.as_ref().map(|s| s.val_ids.len()),
    })
}

#[derive(Serialize)]
struct TfidfArtifact<'a> {
    meta: ArtifactMeta,
    l2: bool,
    #[serde(flatten)]
    model: &'a citepurpose::tfidf::TfidfModel,
}

pub fn cmd_featurize(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let inputs = pipeline::load_inputs(cfg)?;
    let prepared = pipeline::prepare(cfg, &inputs)?;
    let meta = ArtifactMeta::new(cfg);
    let dir = out_dir(cfg)?;

    let features_path = dir.join("features.csv");
    let mut w = csv_writer(&features_path, &meta)?;
    let mut header = vec!["record_id"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header)?;
    for r in &inputs.records {
        let f = pipeline::record_features(r, &inputs.docs);
        let mut row = vec![r.record_id.clone()];
        row.extend(f.hand.to_array().iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(&features_path))?;

    let tfidf_path = dir.join("tfidf.json");
    write_json(
        &tfidf_path,
        &TfidfArtifact {
            meta,
            l2: cfg.tfidf_l2,
            model: &prepared.space.tfidf,
        },
    )?;
    Ok(vec![features_path, tfidf_path])
}

#[derive(Serialize)]
struct HistoryArtifact<'a> {
    meta: ArtifactMeta,
    train_ids: &'a std::collections::BTreeSet<String>,
    val_ids: &'a std::collections::BTreeSet<String>,
    history: &'a model::TrainHistory,
}

pub fn cmd_train(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let inputs = pipeline::load_inputs(cfg)?;
    let prepared = pipeline::prepare(cfg, &inputs)?;
    let outcome = model::train(&cfg.train, &prepared.shape, &inputs.table, prepared.data())?;
    let meta = ArtifactMeta::new(cfg);
    let dir = out_dir(cfg)?;

    let checkpoint = Checkpoint {
        meta: meta.clone(),
        word_vectors: WordVectorRef {
            path: cfg.word_vectors.to_string_lossy().into_owned(),
            sha256: inputs.word_vectors_sha256.clone(),
            dim: inputs.table.dim(),
        },
        shape: prepared.shape,
        shape_table: outcome.params.shape_table(),
        train: cfg.train.clone(),
        best_epoch: outcome.history.best_epoch,
        features: prepared.space.clone(),
        params: outcome.params,
    };
    let ck_path = dir.join("checkpoint.json");
    checkpoint.save(&ck_path)?;
    let history_path = dir.join("history.json");
    write_json(
        &history_path,
        &HistoryArtifact {
            meta,
            train_ids: &prepared.split.train_ids,
            val_ids: &prepared.split.val_ids,
            history: &outcome.history,
        },
    )?;
    log::info!(
        "best epoch {} with {} macro-F1 {:.4}",
        outcome.history.best_epoch,
        outcome.history.monitored_split,
        outcome.history.best_val_macro_f1
    );
    Ok(vec![ck_path, history_path])
}

fn load_checkpoint(cfg: &RunConfig, path: Option<&Path>) -> CliResult<Checkpoint> {
    let path = path.map_or_else(
        || cfg.output_path().join("checkpoint.json"),
        Path::to_path_buf,
    );
    Ok(Checkpoint::load(&path)?)
}

fn load_records(cfg: &RunConfig, input: Option<&Path>) -> CliResult<Vec<CitationRecord>> {
    let path = input.map_or_else(|| cfg.resolve(&cfg.citations), Path::to_path_buf);
    Ok(load_citation_records(
        &path,
        RecordFormat::from_path(&path),
    )?)
}

/// Class probabilities for each record under a checkpoint.
pub fn predict_records(
    cfg: &RunConfig,
    ck: &Checkpoint,
    records: &[CitationRecord],
) -> CliResult<Vec<(PurposeLabel, Vec<f64>)>> {
    let vectors = cfg.resolve(&cfg.word_vectors);
    let table = citepurpose::embeddings::load_word_vectors(&vectors, Some(ck.word_vectors.dim))?;
    ck.check_word_vectors(&citepurpose::config::file_sha256(&vectors)?, &table)?;
    let docs = pipeline::load_documents(cfg)?;
    let net = Net::new(&ck.shape, &ck.params, &table);
    records
        .iter()
        .map(|r| {
            let f = pipeline::record_features(r, &docs);
            let item = ck.features.purpose_item(&table, r, &f)?;
            Ok(net.predict(&item)?)
        })
        .collect()
}

pub fn cmd_predict(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    input: Option<&Path>,
) -> CliResult<Vec<PathBuf>> {
    let ck = load_checkpoint(cfg, checkpoint)?;
    let records = load_records(cfg, input)?;
    let predictions = predict_records(cfg, &ck, &records)?;
    let dir = out_dir(cfg)?;
    let path = dir.join("predictions.csv");
    let mut w = csv_writer(&path, &ArtifactMeta::new(cfg))?;
    let mut header = vec!["record_id".to_string(), "predicted_label".to_string()];
    header.extend(
        PurposeLabel::ALL
            .iter()
            .map(|l| format!("p_{}", l.as_str())),
    );
    w.write_record(&header)?;
    for (r, (label, probs)) in records.iter().zip(&predictions) {
        let mut row = vec![r.record_id.clone(), label.as_str().to_string()];
        row.extend(probs.iter().map(|p| p.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(vec![path])
}

#[derive(Debug, Serialize)]
pub struct Metrics {
    pub meta: ArtifactMeta,
    /// `"validation"` or the path of the evaluated input.
    pub evaluated_on: String,
    pub n: usize,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_class_f1: BTreeMap<String, f64>,
    /// `confusion[gold][predicted]`, rows and columns in label order.
    pub confusion: Vec<Vec<usize>>,
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    input: Option<&Path>,
) -> CliResult<Vec<PathBuf>> {
    let ck = load_checkpoint(cfg, checkpoint)?;
    let records = load_records(cfg, input)?;
    let (records, evaluated_on) = match input {
        Some(p) => (records, p.display().to_string()),
        None => {
            if ck.meta.seed != cfg.seed {
                log::warn!(
                    "checkpoint seed {} differs from run seed {}; the split will differ",
                    ck.meta.seed,
                    cfg.seed
                );
            }
            let split = grouped_split(&records, cfg.val_fraction, cfg.seed)?;
            let val = records
                .into_iter()
                .filter(|r| split.val_ids.contains(&r.record_id))
                .collect();
            (val, "validation".to_string())
        }
    };
    let golds: Vec<PurposeLabel> = records
        .iter()
        .map(|r| {
            r.label.ok_or_else(|| {
                CliError::Usage(format!(
                    "record `{}` has no label to evaluate against",
                    r.record_id
                ))
            })
        })
        .collect::<CliResult<_>>()?;
    let preds: Vec<PurposeLabel> = predict_records(cfg, &ck, &records)?
        .into_iter()
        .map(|(l, _)| l)
        .collect();
    let p: Vec<usize> = preds.iter().map(|l| l.index()).collect();
    let g: Vec<usize> = golds.iter().map(|l| l.index()).collect();
    let f1 = eval::per_class_f1(&p, &g, PurposeLabel::COUNT)?;
    let mut confusion = vec![vec![0usize; PurposeLabel::COUNT]; PurposeLabel::COUNT];
    for (&pi, &gi) in p.iter().zip(&g) {
        confusion[gi][pi] += 1;
    }
    let metrics = Metrics {
        meta: ArtifactMeta::new(cfg),
        evaluated_on,
        n: g.len(),
        macro_f1: eval::macro_f1(&preds, &golds)?,
        accuracy: p.iter().zip(&g).filter(|(a, b)| a == b).count() as f64 / g.len() as f64,
        per_class_f1: PurposeLabel::ALL
            .iter()
            .map(|l| (l.as_str().to_string(), f1[l.index()]))
            .collect(),
        confusion,
    };
    let path = out_dir(cfg)?.join("metrics.json");
    write_json(&path, &metrics)?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct AblationArtifact<'a> {
    meta: ArtifactMeta,
    report: &'a eval::AblationReport,
}

pub fn cmd_ablate(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let inputs = pipeline::load_inputs(cfg)?;
    let prepared = pipeline::prepare(cfg, &inputs)?;
    let report = eval::run_ablation(&cfg.train, &prepared.shape, &inputs.table, prepared.data())?;
    let meta = ArtifactMeta::new(cfg);
    let dir = out_dir(cfg)?;
    let csv_path = dir.join("ablation.csv");
    let mut w = csv_writer(&csv_path, &meta)?;
    w.write_record(["variant", "macro_f1", "delta"])?;
    for v in Variant::ALL {
        let row = report.row(v).expect("every variant is reported");
        w.write_record([
            v.as_str().to_string(),
            row.macro_f1.to_string(),
            row.delta.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(&csv_path))?;
    let json_path = dir.join("ablation.json");
    write_json(
        &json_path,
        &AblationArtifact {
            meta,
            report: &report,
        },
    )?;
    Ok(vec![csv_path, json_path])
}

#[derive(Serialize)]
struct FeatureReportArtifact<'a> {
    meta: ArtifactMeta,
    rows: &'a [FeatureStrengthRow],
}

pub fn cmd_analyze_features(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let inputs = pipeline::load_inputs(cfg)?;
    let labeled: Vec<&CitationRecord> = inputs
        .records
        .iter()
        .filter(|r| r.label.is_some())
        .collect();
    if labeled.is_empty() {
        return Err(CliError::Usage(
            "feature analysis needs labeled records".into(),
        ));
    }
    let features: Vec<_> = labeled
        .iter()
        .map(|r| pipeline::record_features(r, &inputs.docs))
        .collect();
    let labels: Vec<PurposeLabel> = labeled.iter().filter_map(|r| r.label).collect();
    let matrix: Vec<_> = features.iter().map(|f| f.hand.to_array()).collect();
    let mut rows = eval::feature_analysis(&matrix, &labels)?;

    let texts: Vec<&str> = features.iter().map(|f| f.tfidf_text.as_str()).collect();
    let tfidf = fit_tfidf(&texts, cfg.tfidf_max_features)?;
    let vectors: Vec<_> = texts
        .iter()
        .map(|t| {
            let v = tfidf.transform(t);
            if cfg.tfidf_l2 {
                l2_normalize(&v)
            } else {
                v
            }
        })
        .collect();
    let groups: Vec<String> = labeled.iter().map(|r| r.citing_paper_id.clone()).collect();
    rows.push(eval::tfidf_probe(
        &vectors, &labels, &groups, cfg.seed, &cfg.probe,
    )?);

    let meta = ArtifactMeta::new(cfg);
    let dir = out_dir(cfg)?;
    let csv_path = dir.join("feature_report.csv");
    let mut w = csv_writer(&csv_path, &meta)?;
    let mut header = vec!["feature".to_string()];
    header.extend(
        PurposeLabel::ALL
            .iter()
            .map(|l| format!("auc_{}", l.as_str())),
    );
    header.extend(
        PurposeLabel::ALL
            .iter()
            .map(|l| format!("flag_{}", l.as_str())),
    );
    w.write_record(&header)?;
    for row in &rows {
        let mut rec = vec![row.feature.clone()];
        rec.extend(
            row.auc
                .iter()
                .map(|a| a.map_or(String::new(), |a| a.to_string())),
        );
        rec.extend(
            row.strength
                .iter()
                .map(|s| s.map_or("", |s| s.as_str()).to_string()),
        );
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(&csv_path))?;
    let json_path = dir.join("feature_report.json");
    write_json(&json_path, &FeatureReportArtifact { meta, rows: &rows })?;
    Ok(vec![csv_path, json_path])
}

/// Version string printed by `--version`.
pub fn version() -> &'static str {
    TOOL_VERSION
}

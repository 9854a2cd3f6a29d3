use std::path::PathBuf;

use citepurpose::config::{file_sha256, RunConfig};
use citepurpose::model::{self, Net};
use citepurpose::pipeline::{self, ArtifactMeta, Checkpoint, WordVectorRef};
use citepurpose::Error;

fn fixture_config() -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/config.json");
    let mut cfg = RunConfig::load(&path).unwrap();
    cfg.train.max_epochs = 3;
    cfg
}

#[test]
fn identical_runs_give_identical_history_and_parameters() {
    let cfg = fixture_config();
    let inputs = pipeline::load_inputs(&cfg).unwrap();
    let prepared = pipeline::prepare(&cfg, &inputs).unwrap();
    let static_before = inputs.table.clone();
    let a = model::train(&cfg.train, &prepared.shape, &inputs.table, prepared.data()).unwrap();
    let b = model::train(&cfg.train, &prepared.shape, &inputs.table, prepared.data()).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
    assert_eq!(inputs.table, static_before);
    assert_eq!(a.history.monitored_split, "validation");
    assert!(a
        .history
        .epochs
        .iter()
        .all(|e| e.worthiness_loss.is_some() && e.section_loss.is_some()));

    let mut other = cfg.train.clone();
    other.seed += 1;
    let c = model::train(&other, &prepared.shape, &inputs.table, prepared.data()).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn returned_parameters_score_the_best_epoch() {
    let cfg = fixture_config();
    let inputs = pipeline::load_inputs(&cfg).unwrap();
    let prepared = pipeline::prepare(&cfg, &inputs).unwrap();
    let out = model::train(&cfg.train, &prepared.shape, &inputs.table, prepared.data()).unwrap();
    let net = Net::new(&prepared.shape, &out.params, &inputs.table);
    let f1 = model::purpose_macro_f1(&net, &prepared.purpose_val).unwrap();
    assert_eq!(f1, out.history.best_val_macro_f1);
    let best = &out.history.epochs[out.history.best_epoch - 1];
    assert_eq!(best.val_macro_f1, f1);
}

fn checkpoint(cfg: &RunConfig) -> Checkpoint {
    let inputs = pipeline::load_inputs(cfg).unwrap();
    let prepared = pipeline::prepare(cfg, &inputs).unwrap();
    let out = model::train(&cfg.train, &prepared.shape, &inputs.table, prepared.data()).unwrap();
    Checkpoint {
        meta: ArtifactMeta::new(cfg),
        word_vectors: WordVectorRef {
            path: cfg.word_vectors.display().to_string(),
            sha256: inputs.word_vectors_sha256.clone(),
            dim: inputs.table.dim(),
        },
        shape: prepared.shape,
        shape_table: out.params.shape_table(),
        train: cfg.train.clone(),
        best_epoch: out.history.best_epoch,
        features: prepared.space.clone(),
        params: out.params,
    }
}

#[test]
fn checkpoint_round_trips_and_rejects_mismatched_shapes() {
    let mut cfg = fixture_config();
    cfg.train.max_epochs = 1;
    let ck = checkpoint(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkpoint.json");
    ck.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.params, ck.params);
    assert_eq!(loaded.features, ck.features);
    assert_eq!(loaded.meta, ck.meta);

    let vectors = cfg.resolve(&cfg.word_vectors);
    let table = citepurpose::embeddings::load_word_vectors(&vectors, None).unwrap();
    loaded
        .check_word_vectors(&file_sha256(&vectors).unwrap(), &table)
        .unwrap();
    assert!(loaded
        .check_word_vectors("0000", &table)
        .unwrap_err()
        .is_schema_error());

    let mut bad = ck.clone();
    bad.shape.hidden += 1;
    bad.save(&path).unwrap();
    assert!(matches!(Checkpoint::load(&path), Err(Error::Schema(_))));

    let mut bad = ck.clone();
    bad.params.att_u.data.pop();
    bad.save(&path).unwrap();
    assert!(Checkpoint::load(&path).unwrap_err().is_schema_error());

    std::fs::write(&path, b"{\"meta\": 1}").unwrap();
    assert!(Checkpoint::load(&path).unwrap_err().is_schema_error());
}

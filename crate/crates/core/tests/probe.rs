use citepurpose::corpus::{seeded_shuffle, PurposeLabel};
use citepurpose::eval::{tfidf_probe, ProbeConfig};
use citepurpose::tfidf::{fit_tfidf, l2_normalize, SparseVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FILLER: [&str; 12] = [
    "graph", "model", "data", "parser", "tree", "corpus", "token", "layer", "signal", "metric",
    "sample", "trend",
];

/// 200 records over 20 groups, labels cycling through all six classes.
/// Every USES record, and only those, contains the marker token.
fn corpus(seed: u64) -> (Vec<SparseVector>, Vec<PurposeLabel>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<PurposeLabel> = (0..200).map(|i| PurposeLabel::ALL[i % 6]).collect();
    let texts: Vec<String> = labels
        .iter()
        .map(|&l| {
            let mut words: Vec<&str> = (0..6)
                .map(|_| FILLER[rng.gen_range(0..FILLER.len())])
                .collect();
            if l == PurposeLabel::Uses {
                words.insert(rng.gen_range(0..6), "toolkit");
            }
            words.join(" ")
        })
        .collect();
    let model = fit_tfidf(&texts, 5000).unwrap();
    let vectors = texts
        .iter()
        .map(|t| l2_normalize(&model.transform(t)))
        .collect();
    let groups = (0..200).map(|i| format!("g{:02}", (i * 7) % 20)).collect();
    (vectors, labels, groups)
}

#[test]
fn marker_class_is_detected() {
    let (v, l, g) = corpus(1);
    let row = tfidf_probe(&v, &l, &g, 13, &ProbeConfig::default()).unwrap();
    assert_eq!(row.feature, "tfidf");
    let auc = row.auc[PurposeLabel::Uses.index()].expect("USES has validation items");
    assert!(auc >= 0.95, "USES AUC {auc}");
}

/// With about ten positives per class in validation a single chance-level
/// AUC has a spread near 0.1, so the check is on the pooled distribution
/// over 30 label shuffles rather than on one draw.
#[test]
fn shuffled_labels_stay_near_chance() {
    let (v, labels, g) = corpus(1);
    let mut aucs = Vec::new();
    for shuffle in 0..30 {
        let mut l = labels.clone();
        seeded_shuffle(&mut l, shuffle);
        let row = tfidf_probe(&v, &l, &g, 13, &ProbeConfig::default()).unwrap();
        aucs.extend(
            row.auc
                .iter()
                .map(|a| a.expect("every class has validation items")),
        );
    }
    let n = aucs.len() as f64;
    let mean = aucs.iter().sum::<f64>() / n;
    let sd = (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    let within = aucs.iter().filter(|a| (*a - 0.5).abs() <= 0.15).count() as f64 / n;
    assert!((mean - 0.5).abs() <= 0.03, "mean AUC {mean}");
    assert!(sd <= 0.15, "AUC spread {sd}");
    assert!(within >= 0.75, "{within} of cells within 0.5 +- 0.15");
}

#[test]
fn probe_is_deterministic_and_seed_sensitive() {
    let (v, l, g) = corpus(2);
    let cfg = ProbeConfig {
        epochs: 5,
        ..ProbeConfig::default()
    };
    let a = tfidf_probe(&v, &l, &g, 4, &cfg).unwrap();
    let b = tfidf_probe(&v, &l, &g, 4, &cfg).unwrap();
    assert_eq!(a, b);
    let c = tfidf_probe(&v, &l, &g, 5, &cfg).unwrap();
    assert_ne!(a.auc, c.auc);
}

#[test]
fn rejects_mismatched_inputs() {
    let (v, l, g) = corpus(3);
    assert!(tfidf_probe(&v[..10], &l, &g, 1, &ProbeConfig::default()).is_err());
    let one_group = vec!["g".to_string(); l.len()];
    assert!(tfidf_probe(&v, &l, &one_group, 1, &ProbeConfig::default()).is_err());
}

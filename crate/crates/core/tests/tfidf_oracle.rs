use std::collections::{BTreeMap, BTreeSet};

use citepurpose::tfidf::{fit_tfidf, l2_normalize};
use proptest::prelude::*;

const WORDS: [&str; 10] = [
    "graph", "Model", "data", "we", "use", "the", "of", "2019", "parser", "tree",
];

fn oracle_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn doc_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec(
        (
            0..WORDS.len(),
            prop::sample::select(vec![" ", ", ", ". ", "-"]),
        ),
        0..12,
    )
    .prop_map(|ws| {
        ws.into_iter()
            .map(|(i, sep)| format!("{}{sep}", WORDS[i]))
            .collect()
    })
}

proptest! {
    #[test]
    fn transform_matches_brute_force(
        docs in prop::collection::vec(doc_strategy(), 1..=20),
        query in doc_strategy(),
    ) {
        let model = fit_tfidf(&docs, 5000).unwrap();
        let n = docs.len() as f64;
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for d in &docs {
            for t in oracle_tokens(d).into_iter().collect::<BTreeSet<_>>() {
                *df.entry(t).or_default() += 1;
            }
        }
        prop_assert_eq!(model.dim(), df.len());
        for (col, tok) in df.keys().enumerate() {
            prop_assert_eq!(model.column(tok), Some(col));
        }
        for q in docs.iter().chain([&query]) {
            let mut dense = vec![0.0; df.len()];
            for t in oracle_tokens(q) {
                if let Some(d) = df.get(&t) {
                    let col = df.keys().position(|k| *k == t).unwrap();
                    dense[col] += ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0;
                }
            }
            let got = model.transform(q).to_dense();
            for (g, e) in got.iter().zip(&dense) {
                prop_assert!((g - e).abs() <= 1e-12 * e.abs(), "{} vs {}", g, e);
            }
        }
    }

    #[test]
    fn idf_decreases_with_df_and_is_one_for_ubiquitous_terms(docs in prop::collection::vec(doc_strategy(), 1..=20)) {
        let Ok(model) = fit_tfidf(&docs, 5000) else { return Ok(()); };
        let mut pairs: Vec<(usize, f64)> = (0..model.dim())
            .map(|c| {
                let t = model.token(c);
                (model.df(t).unwrap(), model.idf(t).unwrap())
            })
            .collect();
        pairs.sort_by_key(|p| p.0);
        for w in pairs.windows(2) {
            if w[0].0 < w[1].0 {
                prop_assert!(w[0].1 > w[1].1);
            } else {
                prop_assert_eq!(w[0].1, w[1].1);
            }
        }
        for (df, idf) in pairs {
            prop_assert!(idf >= 1.0);
            if df == docs.len() {
                prop_assert_eq!(idf, 1.0);
            }
        }
        prop_assert!(model.transform("").is_zero());
    }

    #[test]
    fn normalized_vectors_have_unit_norm(docs in prop::collection::vec(doc_strategy(), 1..=10), query in doc_strategy()) {
        let model = fit_tfidf(&docs, 5000).unwrap();
        let v = l2_normalize(&model.transform(&query));
        prop_assert!(v.is_zero() || (v.norm() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn single_occurrence_in_three_documents() {
    let model = fit_tfidf(&["graph data", "tree data", "parser data"], 10).unwrap();
    let v = model.transform("graph");
    assert_eq!(v.entries.len(), 1);
    assert!((v.entries[0].1 - (1.0 + 2f64.ln())).abs() < 1e-15);
}

#[test]
fn cap_keeps_most_frequent_terms() {
    let model = fit_tfidf(&["a b c", "a b", "a d"], 2).unwrap();
    assert_eq!(
        (0..model.dim()).map(|c| model.token(c)).collect::<Vec<_>>(),
        ["a", "b"]
    );
}

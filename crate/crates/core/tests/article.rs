use std::path::PathBuf;

use citepurpose::corpus::{load_citation_records, load_fulltexts, FullTextDocument, RecordFormat};
use citepurpose::features::{extract_hand_features, FEATURE_NAMES};
use citepurpose::textproc::{locate_citation_occurrences, partition_sections, Section};
use proptest::prelude::*;

fn article_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/article")
}

#[test]
fn fixture_article_features_match_hand_computation() {
    let dir = article_dir();
    let docs = load_fulltexts(&dir.join("fulltext")).unwrap();
    let records = load_citation_records(&dir.join("record.jsonl"), RecordFormat::Jsonl).unwrap();
    let doc = partition_sections(&docs["art1"]);
    assert_eq!(doc.sentence_count(), 12);

    let occ =
        locate_citation_occurrences(&doc, &records[0].cited_author, &records[0].citation_context)
            .unwrap();
    let idx: Vec<usize> = occ.iter().map(|o| o.sentence_index).collect();
    assert_eq!(idx, [1, 3, 6, 8, 10]);
    let sections: Vec<Section> = occ.iter().map(|o| o.section).collect();
    assert_eq!(
        sections,
        [
            Section::Other,
            Section::Introduction,
            Section::Methods,
            Section::Results,
            Section::Discussion
        ]
    );

    let v = extract_hand_features(&records[0], Some(&doc)).to_array();
    let expected = [5.0, 1.0, 1.0, 1.0, 1.0, 9.0 / 12.0, 2.0 / 12.0, 1.0, 2.0];
    for (name, (g, e)) in FEATURE_NAMES.iter().zip(v.iter().zip(expected)) {
        assert_eq!(*g, e, "{name}");
    }
}

#[test]
fn without_fulltext_only_text_features_remain() {
    let records =
        load_citation_records(&article_dir().join("record.jsonl"), RecordFormat::Jsonl).unwrap();
    let v = extract_hand_features(&records[0], None).to_array();
    assert_eq!(v, [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0]);
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec!["smith", "Jones", "graph", "data", "we", "use", "the"]),
        1..6,
    )
    .prop_map(|ws| {
        let mut s = ws.join(" ");
        s.push('.');
        s
    })
}

proptest! {
    #[test]
    fn occurrences_are_increasing_and_never_empty(
        body in prop::collection::vec(sentence(), 1..15),
        context in "[a-z]{1,6}( [a-z]{1,6}){0,4}",
        with_headers in any::<bool>(),
    ) {
        let mut text = String::new();
        for (i, s) in body.iter().enumerate() {
            if with_headers && i % 4 == 0 {
                text.push_str(&format!("\n{} Results\n", i / 4 + 1));
            }
            text.push_str(s);
            text.push(' ');
        }
        let doc = partition_sections(&FullTextDocument { citing_paper_id: "p".into(), raw_text: text });
        prop_assume!(doc.sentence_count() > 0);
        let occ = locate_citation_occurrences(&doc, "A. Smith", &context).unwrap();
        prop_assert!(!occ.is_empty());
        prop_assert!(occ.windows(2).all(|w| w[0].sentence_index < w[1].sentence_index));
        prop_assert!(occ.iter().all(|o| o.sentence_index < doc.sentence_count()));
    }
}

//! Data model for citation records, full texts and scaffold examples, plus
//! loaders and the paper-grouped train/validation split.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Citation purpose. The declaration order is the class index order used by
/// every model output and report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PurposeLabel {
    #[serde(rename = "BACKGROUND")]
    Background,
    #[serde(rename = "USES")]
    Uses,
    #[serde(rename = "COMPARES_CONTRASTS")]
    ComparesContrasts,
    #[serde(rename = "MOTIVATION")]
    Motivation,
    #[serde(rename = "EXTENSION")]
    Extension,
    #[serde(rename = "FUTURE")]
    Future,
}

impl PurposeLabel {
    pub const COUNT: usize = 6;

    pub const ALL: [PurposeLabel; 6] = [
        PurposeLabel::Background,
        PurposeLabel::Uses,
        PurposeLabel::ComparesContrasts,
        PurposeLabel::Motivation,
        PurposeLabel::Extension,
        PurposeLabel::Future,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PurposeLabel::Background => "BACKGROUND",
            PurposeLabel::Uses => "USES",
            PurposeLabel::ComparesContrasts => "COMPARES_CONTRASTS",
            PurposeLabel::Motivation => "MOTIVATION",
            PurposeLabel::Extension => "EXTENSION",
            PurposeLabel::Future => "FUTURE",
        }
    }
}

impl fmt::Display for PurposeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel(pub String);

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown label `{}`", self.0)
    }
}

impl std::error::Error for UnknownLabel {}

impl FromStr for PurposeLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|label| label.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// Section label of the section-prediction scaffold task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionLabel {
    Introduction,
    Methods,
    Results,
    Discussion,
    RelatedWork,
    Conclusion,
    Other,
}

impl SectionLabel {
    pub const COUNT: usize = 7;

    pub const ALL: [SectionLabel; 7] = [
        SectionLabel::Introduction,
        SectionLabel::Methods,
        SectionLabel::Results,
        SectionLabel::Discussion,
        SectionLabel::RelatedWork,
        SectionLabel::Conclusion,
        SectionLabel::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SectionLabel::Introduction => "introduction",
            SectionLabel::Methods => "methods",
            SectionLabel::Results => "results",
            SectionLabel::Discussion => "discussion",
            SectionLabel::RelatedWork => "related_work",
            SectionLabel::Conclusion => "conclusion",
            SectionLabel::Other => "other",
        }
    }
}

impl FromStr for SectionLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|label| label.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// One citation context with its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationRecord {
    pub record_id: String,
    pub citing_paper_id: String,
    pub citing_title: String,
    pub citing_author: String,
    pub cited_title: String,
    pub cited_author: String,
    pub citation_context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<PurposeLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullTextDocument {
    pub citing_paper_id: String,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorthinessExample {
    pub sentence: String,
    pub has_citation: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionExample {
    pub sentence: String,
    pub section_label: SectionLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Jsonl,
    Csv,
}

impl RecordFormat {
    /// Guess from the file extension; anything other than `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => RecordFormat::Csv,
            _ => RecordFormat::Jsonl,
        }
    }
}

/// Wire shape of one record. The label is kept as a string so unknown values
/// are reported with their line number instead of as a serde error.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    record_id: String,
    citing_paper_id: String,
    citing_title: String,
    citing_author: String,
    cited_title: String,
    cited_author: String,
    citation_context: String,
    #[serde(default)]
    label: Option<String>,
}

impl RawRecord {
    fn into_record(self, path: &Path, line: usize) -> Result<CitationRecord> {
        if self.record_id.trim().is_empty() {
            return Err(Error::parse(path, line, "field `record_id`: empty"));
        }
        if self.citation_context.trim().is_empty() {
            return Err(Error::parse(path, line, "field `citation_context`: empty"));
        }
        let label = match self.label.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(
                s.parse::<PurposeLabel>()
                    .map_err(|e| Error::parse(path, line, format!("field `label`: {e}")))?,
            ),
        };
        Ok(CitationRecord {
            record_id: self.record_id,
            citing_paper_id: self.citing_paper_id,
            citing_title: self.citing_title,
            citing_author: self.citing_author,
            cited_title: self.cited_title,
            cited_author: self.cited_author,
            citation_context: self.citation_context,
            label,
        })
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Load citation records from JSONL or CSV (header row with the JSONL key
/// names). Records come back in file order.
pub fn load_citation_records(path: &Path, format: RecordFormat) -> Result<Vec<CitationRecord>> {
    let raw = match format {
        RecordFormat::Jsonl => read_jsonl::<RawRecord>(path)?,
        RecordFormat::Csv => read_csv_records(path)?,
    };
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(raw.len());
    for (line, row) in raw {
        let record = row.into_record(path, line)?;
        if !seen.insert(record.record_id.clone()) {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate record_id `{}`", record.record_id),
            ));
        }
        records.push(record);
    }
    Ok(records)
}

fn read_csv_records(path: &Path) -> Result<Vec<(usize, RawRecord)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let mut out = Vec::new();
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    for result in reader.records() {
        let row = result.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let raw: RawRecord = row
            .deserialize(Some(&headers))
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        out.push((line, raw));
    }
    Ok(out)
}

/// Read a JSONL file, returning each parsed row with its 1-based line number.
/// Blank lines are skipped.
fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        out.push((line_no, row));
    }
    Ok(out)
}

/// Write records as JSONL in the same schema the loader reads.
pub fn write_citation_records_jsonl(path: &Path, records: &[CitationRecord]) -> Result<()> {
    let mut buf = Vec::new();
    for record in records {
        serde_json::to_writer(&mut buf, record)?;
        buf.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Load every `<citing_paper_id>.txt` in `dir`. Other files are ignored.
pub fn load_fulltexts(dir: &Path) -> Result<BTreeMap<String, FullTextDocument>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() && path.extension().and_then(|e| e.to_str()) == Some("txt") {
            paths.push(path);
        }
    }
    paths.sort();
    let mut docs = BTreeMap::new();
    for path in paths {
        let Some(id) = path
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_string)
        else {
            continue;
        };
        let raw_text = read_to_string(&path)?;
        docs.insert(
            id.clone(),
            FullTextDocument {
                citing_paper_id: id,
                raw_text,
            },
        );
    }
    Ok(docs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaffoldTask {
    Worthiness,
    Section,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScaffoldExamples {
    Worthiness(Vec<WorthinessExample>),
    Section(Vec<SectionExample>),
}

#[derive(Deserialize)]
struct RawWorthiness {
    sentence: String,
    has_citation: serde_json::Value,
}

#[derive(Deserialize)]
struct RawSection {
    sentence: String,
    section_label: String,
}

pub fn load_scaffold_examples(path: &Path, task: ScaffoldTask) -> Result<ScaffoldExamples> {
    match task {
        ScaffoldTask::Worthiness => {
            load_worthiness_examples(path).map(ScaffoldExamples::Worthiness)
        }
        ScaffoldTask::Section => load_section_examples(path).map(ScaffoldExamples::Section),
    }
}

pub fn load_worthiness_examples(path: &Path) -> Result<Vec<WorthinessExample>> {
    read_jsonl::<RawWorthiness>(path)?
        .into_iter()
        .map(|(line, raw)| {
            if raw.sentence.trim().is_empty() {
                return Err(Error::parse(path, line, "field `sentence`: empty"));
            }
            let has_citation = raw.has_citation.as_bool().ok_or_else(|| {
                Error::parse(
                    path,
                    line,
                    format!(
                        "field `has_citation`: expected boolean, got {}",
                        raw.has_citation
                    ),
                )
            })?;
            Ok(WorthinessExample {
                sentence: raw.sentence,
                has_citation,
            })
        })
        .collect()
}

pub fn load_section_examples(path: &Path) -> Result<Vec<SectionExample>> {
    read_jsonl::<RawSection>(path)?
        .into_iter()
        .map(|(line, raw)| {
            if raw.sentence.trim().is_empty() {
                return Err(Error::parse(path, line, "field `sentence`: empty"));
            }
            let section_label = raw
                .section_label
                .parse()
                .map_err(|e| Error::parse(path, line, format!("field `section_label`: {e}")))?;
            Ok(SectionExample {
                sentence: raw.sentence,
                section_label,
            })
        })
        .collect()
}

/// Train/validation assignment of record ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train_ids: BTreeSet<String>,
    pub val_ids: BTreeSet<String>,
    pub seed: u64,
}

/// Number of validation items for a fraction of `n`, clamped to `1..n`.
///
/// A small slack absorbs representation error so `0.3 * 10` gives 3, not 4.
pub fn val_count(n: usize, val_fraction: f64) -> usize {
    let k = (val_fraction * n as f64 - 1e-9).ceil().max(1.0) as usize;
    k.min(n.saturating_sub(1))
}

/// Seeded Fisher–Yates shuffle, walking from the last index down and drawing
/// `j` uniformly from `0..=i` with a ChaCha8 generator seeded by `seed`.
pub fn seeded_shuffle<T>(items: &mut [T], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Split labeled records so that every citing paper lands wholly on one side.
///
/// Rule: sort the distinct `citing_paper_id`s lexicographically, apply
/// [`seeded_shuffle`], and send the first [`val_count`] groups to validation.
pub fn grouped_split(
    records: &[CitationRecord],
    val_fraction: f64,
    seed: u64,
) -> Result<SplitAssignment> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Config(format!(
            "val_fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    if let Some(r) = records.iter().find(|r| r.label.is_none()) {
        return Err(Error::InvalidInput(format!(
            "record `{}` is unlabeled; splits require labeled records",
            r.record_id
        )));
    }
    let groups: BTreeSet<&str> = records.iter().map(|r| r.citing_paper_id.as_str()).collect();
    if groups.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "grouped split needs at least 2 citing papers, found {}",
            groups.len()
        )));
    }
    let mut order: Vec<&str> = groups.into_iter().collect();
    seeded_shuffle(&mut order, seed);
    let k = val_count(order.len(), val_fraction);
    let val_groups: HashSet<&str> = order[..k].iter().copied().collect();

    let mut split = SplitAssignment {
        train_ids: BTreeSet::new(),
        val_ids: BTreeSet::new(),
        seed,
    };
    for r in records {
        if val_groups.contains(r.citing_paper_id.as_str()) {
            split.val_ids.insert(r.record_id.clone());
        } else {
            split.train_ids.insert(r.record_id.clone());
        }
    }
    Ok(split)
}

/// Ungrouped seeded split for scaffold examples: shuffle indices with
/// [`seeded_shuffle`] and return `(train, val)` index lists in ascending order.
pub fn index_split(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    if n < 2 {
        return ((0..n).collect(), Vec::new());
    }
    let mut order: Vec<usize> = (0..n).collect();
    seeded_shuffle(&mut order, seed);
    let k = val_count(n, val_fraction);
    let mut val = order[..k].to_vec();
    let mut train = order[k..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, paper: &str, label: Option<PurposeLabel>) -> CitationRecord {
        CitationRecord {
            record_id: id.into(),
            citing_paper_id: paper.into(),
            citing_title: "Citing".into(),
            citing_author: "A. Author".into(),
            cited_title: "Cited".into(),
            cited_author: "B. Writer".into(),
            citation_context: "Writer showed this.".into(),
            label,
        }
    }

    fn write_file(dir: &Path, name: &str, body: &[u8]) -> PathBuf {
        let path = dir.join(name);
        fs::File::create(&path).unwrap().write_all(body).unwrap();
        path
    }

    const ROW1: &str = r#"{"record_id":"r1","citing_paper_id":"p1","citing_title":"T","citing_author":"A","cited_title":"C","cited_author":"B","citation_context":"ctx one","label":"BACKGROUND"}"#;
    const ROW2: &str = r#"{"record_id":"r2","citing_paper_id":"p1","citing_title":"T","citing_author":"A","cited_title":"C","cited_author":"B","citation_context":"ctx two","label":"USES"}"#;

    #[test]
    fn jsonl_rows_load_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "c.jsonl",
            format!("{ROW1}\n{ROW2}\n").as_bytes(),
        );
        let records = load_citation_records(&path, RecordFormat::Jsonl).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].record_id, "r1");
        assert_eq!(records[0].label, Some(PurposeLabel::Background));
        assert_eq!(records[1].label, Some(PurposeLabel::Uses));
    }

    #[test]
    fn misspelled_label_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let bad = ROW2.replace("USES", "BACKROUND");
        let path = write_file(dir.path(), "c.jsonl", format!("{ROW1}\n{bad}\n").as_bytes());
        let err = load_citation_records(&path, RecordFormat::Jsonl).unwrap_err();
        match &err {
            Error::Parse { line, message, .. } => {
                assert_eq!(*line, 2);
                assert!(message.contains("label"), "{message}");
                assert!(message.contains("BACKROUND"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err.is_schema_error());
    }

    #[test]
    fn duplicate_ids_and_missing_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "dup.jsonl",
            format!("{ROW1}\n{ROW1}\n").as_bytes(),
        );
        let err = load_citation_records(&path, RecordFormat::Jsonl).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let missing = ROW1.replace(r#""cited_title":"C","#, "");
        let path = write_file(dir.path(), "miss.jsonl", missing.as_bytes());
        let err = load_citation_records(&path, RecordFormat::Jsonl).unwrap_err();
        assert!(err.to_string().contains("cited_title"), "{err}");
        assert!(err.to_string().contains(":1:"), "{err}");
    }

    #[test]
    fn csv_with_header_loads_and_allows_blank_label() {
        let dir = tempfile::tempdir().unwrap();
        let body = "record_id,citing_paper_id,citing_title,citing_author,cited_title,cited_author,citation_context,label\n\
                    r1,p1,T,A,C,B,\"Smith, et al. showed\",FUTURE\n\
                    r2,p2,T,A,C,B,plain,\n";
        let path = write_file(dir.path(), "c.csv", body.as_bytes());
        let records = load_citation_records(&path, RecordFormat::from_path(&path)).unwrap();
        assert_eq!(records[0].citation_context, "Smith, et al. showed");
        assert_eq!(records[0].label, Some(PurposeLabel::Future));
        assert_eq!(records[1].label, None);

        let bad = body.replace("FUTURE", "LATER");
        let path = write_file(dir.path(), "bad.csv", bad.as_bytes());
        let err = load_citation_records(&path, RecordFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn fulltexts_keyed_by_stem() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_fulltexts(dir.path()).unwrap().is_empty());
        write_file(dir.path(), "p1.txt", b"one");
        write_file(dir.path(), "p2.txt", b"two");
        let docs = load_fulltexts(dir.path()).unwrap();
        assert_eq!(docs.keys().cloned().collect::<Vec<_>>(), vec!["p1", "p2"]);
        assert_eq!(docs["p2"].raw_text, "two");

        write_file(dir.path(), "p3.txt", &[0x66, 0xff, 0xfe]);
        let err = load_fulltexts(dir.path()).unwrap_err();
        assert!(err.to_string().contains("p3.txt"), "{err}");
    }

    #[test]
    fn scaffold_loaders_validate_fields() {
        let dir = tempfile::tempdir().unwrap();
        let w = write_file(
            dir.path(),
            "w.jsonl",
            br#"{"sentence": "See [3].", "has_citation": true}"#,
        );
        match load_scaffold_examples(&w, ScaffoldTask::Worthiness).unwrap() {
            ScaffoldExamples::Worthiness(ex) => {
                assert_eq!(
                    ex,
                    vec![WorthinessExample {
                        sentence: "See [3].".into(),
                        has_citation: true
                    }]
                )
            }
            other => panic!("{other:?}"),
        }
        let w = write_file(
            dir.path(),
            "w2.jsonl",
            br#"{"sentence": "See [3].", "has_citation": "yes"}"#,
        );
        assert!(load_worthiness_examples(&w).is_err());

        let s = write_file(
            dir.path(),
            "s.jsonl",
            br#"{"sentence": "We train.", "section_label": "methods"}"#,
        );
        assert_eq!(
            load_section_examples(&s).unwrap()[0].section_label,
            SectionLabel::Methods
        );
        let s = write_file(
            dir.path(),
            "s2.jsonl",
            br#"{"sentence": "The end.", "section_label": "epilogue"}"#,
        );
        let err = load_section_examples(&s).unwrap_err();
        assert!(err.to_string().contains("epilogue"));
    }

    #[test]
    fn labels_parse_closed_set() {
        for label in PurposeLabel::ALL {
            assert_eq!(label.as_str().parse::<PurposeLabel>().unwrap(), label);
            assert_eq!(PurposeLabel::from_index(label.index()), Some(label));
        }
        for bad in ["background", "BACKROUND", "", "OTHER"] {
            assert!(bad.parse::<PurposeLabel>().is_err());
        }
    }

    #[test]
    fn two_papers_split_atomically_and_deterministically() {
        let recs = vec![
            record("a1", "A", Some(PurposeLabel::Uses)),
            record("a2", "A", Some(PurposeLabel::Uses)),
            record("b1", "B", Some(PurposeLabel::Future)),
            record("b2", "B", Some(PurposeLabel::Future)),
        ];
        let split = grouped_split(&recs, 0.5, 3).unwrap();
        assert_eq!(split.val_ids.len(), 2);
        let val_paper = &split.val_ids.iter().next().unwrap()[..1];
        assert!(split.val_ids.iter().all(|id| id.starts_with(val_paper)));
        assert!(split.train_ids.iter().all(|id| !id.starts_with(val_paper)));
        assert_eq!(split, grouped_split(&recs, 0.5, 3).unwrap());
    }

    #[test]
    fn split_errors() {
        let one_paper = vec![
            record("a1", "A", Some(PurposeLabel::Uses)),
            record("a2", "A", Some(PurposeLabel::Uses)),
        ];
        assert!(grouped_split(&one_paper, 0.5, 0).is_err());
        let unlabeled = vec![
            record("a1", "A", None),
            record("b1", "B", Some(PurposeLabel::Uses)),
        ];
        assert!(grouped_split(&unlabeled, 0.5, 0).is_err());
    }

    #[test]
    fn val_count_handles_representation_error() {
        assert_eq!(val_count(10, 0.3), 3);
        assert_eq!(val_count(2, 0.5), 1);
        assert_eq!(val_count(10, 0.01), 1);
        assert_eq!(val_count(3, 0.99), 2);
    }

    proptest::proptest! {
        #[test]
        fn split_never_leaks_papers(
            papers in proptest::collection::vec(0u8..12, 2..60),
            frac in 0.05f64..0.95,
            seed in 0u64..1000,
        ) {
            let recs: Vec<_> = papers
                .iter()
                .enumerate()
                .map(|(i, p)| record(&format!("r{i}"), &format!("P{p}"), Some(PurposeLabel::Uses)))
                .collect();
            let distinct: BTreeSet<_> = papers.iter().collect();
            proptest::prop_assume!(distinct.len() >= 2);
            let split = grouped_split(&recs, frac, seed).unwrap();
            proptest::prop_assert!(split.train_ids.is_disjoint(&split.val_ids));
            proptest::prop_assert_eq!(split.train_ids.len() + split.val_ids.len(), recs.len());
            let paper_of = |id: &String| recs.iter().find(|r| &r.record_id == id).unwrap().citing_paper_id.clone();
            let train_papers: BTreeSet<_> = split.train_ids.iter().map(paper_of).collect();
            let val_papers: BTreeSet<_> = split.val_ids.iter().map(paper_of).collect();
            proptest::prop_assert!(train_papers.is_disjoint(&val_papers));
            proptest::prop_assert!(!train_papers.is_empty() && !val_papers.is_empty());
        }

        #[test]
        fn jsonl_round_trip(contexts in proptest::collection::vec("[a-zA-Z ,.\"\\\\é]{1,40}", 1..8)) {
            let recs: Vec<_> = contexts
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let mut r = record(&format!("r{i}"), "P", PurposeLabel::from_index(i % 7));
                    r.citation_context = format!("x{c}");
                    r
                })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.jsonl");
            write_citation_records_jsonl(&path, &recs).unwrap();
            let back = load_citation_records(&path, RecordFormat::Jsonl).unwrap();
            proptest::prop_assert_eq!(back, recs);
        }
    }
}

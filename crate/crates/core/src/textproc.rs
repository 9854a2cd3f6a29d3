//! Tokenization, sentence segmentation, stop words, section partitioning of
//! full texts and location of citation occurrences.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::FullTextDocument;
use crate::{Error, Result};

const STOPWORDS: &str = include_str!("../data/stopwords.txt");
const SECTION_SYNONYMS: &str = include_str!("../data/section_synonyms.json");

/// Words after which a period never ends a sentence. Compared against the
/// lowercased word preceding the period with leading brackets or quotes
/// removed, so "et al." matches `al` and "e.g." matches `e.g`.
pub const ABBREVIATIONS: &[&str] = &[
    "al", "fig", "figs", "e.g", "i.e", "eq", "eqs", "cf", "vs", "sec", "tab", "no", "dr", "mr",
    "mrs", "ms", "prof", "approx", "ref", "refs", "resp", "ch", "vol", "pp", "st",
];

/// Lowercased maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Byte span of one sentence in its source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn is_guarded(text: &str, period_at: usize) -> bool {
    let before = &text[..period_at];
    let word_start = before
        .rfind(char::is_whitespace)
        .map(|i| i + before[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(0);
    let word = before[word_start..]
        .trim_start_matches(['(', '[', '"', '\'', '\u{201c}'])
        .to_lowercase();
    if word.is_empty() {
        return false;
    }
    let mut chars = word.chars();
    // A lone letter is an initial ("J. Smith").
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_alphabetic() {
            return true;
        }
    }
    ABBREVIATIONS.contains(&word.as_str())
}

/// Split text into sentences.
///
/// A sentence ends at `.`, `!` or `?` (plus any directly following closing
/// quotes or brackets) when the next non-whitespace character is uppercase or
/// a digit and at least one whitespace character intervenes. A period after a
/// word in [`ABBREVIATIONS`] or after a single letter never ends a sentence.
/// Spans are trimmed of surrounding whitespace and never overlap.
pub fn split_sentences(text: &str) -> Vec<SentenceSpan> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if start.is_none() {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start = Some(pos);
        }
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len()
                && (is_closer(chars[j].1) || matches!(chars[j].1, '.' | '!' | '?'))
            {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let boundary = k > j
                && k < chars.len()
                && (chars[k].1.is_uppercase() || chars[k].1.is_ascii_digit())
                && !(c == '.' && is_guarded(text, pos));
            if boundary {
                spans.push(SentenceSpan {
                    start: start.take().unwrap(),
                    end,
                });
                i = k;
                continue;
            }
            i = j;
            continue;
        }
        i += 1;
    }
    if let Some(s) = start {
        let end = s + text[s..].trim_end().len();
        if end > s {
            spans.push(SentenceSpan { start: s, end });
        }
    }
    spans
}

fn stopword_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

/// Membership in the shipped 179-word English stop list. Expects a lowercased
/// token.
pub fn is_stop_word(token: &str) -> bool {
    stopword_set().contains(token)
}

pub fn stopword_count() -> usize {
    stopword_set().len()
}

/// Canonical sections used by the hand features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Introduction,
    Methods,
    Results,
    Discussion,
    Other,
}

impl Section {
    pub const ALL: [Section; 5] = [
        Section::Introduction,
        Section::Methods,
        Section::Results,
        Section::Discussion,
        Section::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Section::Introduction => "introduction",
            Section::Methods => "methods",
            Section::Results => "results",
            Section::Discussion => "discussion",
            Section::Other => "other",
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Header patterns per canonical section, matched against whole header lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionSynonyms {
    patterns: BTreeMap<String, Section>,
}

impl SectionSynonyms {
    pub fn from_json(json: &str) -> Result<Self> {
        let raw: BTreeMap<Section, Vec<String>> = serde_json::from_str(json)?;
        let mut patterns = BTreeMap::new();
        for (section, list) in raw {
            for pattern in list {
                patterns.insert(normalize_header(&pattern), section);
            }
        }
        Ok(Self { patterns })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }

    /// The shipped table.
    pub fn builtin() -> &'static Self {
        static TABLE: OnceLock<SectionSynonyms> = OnceLock::new();
        TABLE.get_or_init(|| {
            Self::from_json(SECTION_SYNONYMS).expect("shipped section table parses")
        })
    }

    /// Canonical section for a header line, if the line is a recognized header.
    /// Leading numbering ("3", "3.1", "IV.") and a trailing colon or period
    /// are ignored; matching is case-insensitive.
    pub fn classify_header(&self, line: &str) -> Option<Section> {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.len() > 80 {
            return None;
        }
        let key = normalize_header(strip_numbering(trimmed));
        self.patterns.get(&key).copied()
    }
}

fn normalize_header(s: &str) -> String {
    let s = s.trim().trim_end_matches([':', '.']).to_lowercase();
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_numbering(line: &str) -> &str {
    let Some((first, rest)) = line.split_once(char::is_whitespace) else {
        return line;
    };
    let head = first.trim_end_matches('.');
    let arabic = !head.is_empty() && head.chars().all(|c| c.is_ascii_digit() || c == '.');
    let roman = !head.is_empty() && head.chars().all(|c| matches!(c, 'I' | 'V' | 'X' | 'L'));
    if arabic || roman {
        rest.trim_start()
    } else {
        line
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub tokens: Vec<String>,
}

/// Contiguous run of sentences in one section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionSpan {
    pub section: Section,
    pub sentences: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionedDocument {
    pub citing_paper_id: String,
    pub sentences: Vec<Sentence>,
    /// Ordered, disjoint spans covering every sentence exactly once. The same
    /// section may appear in several spans when a paper repeats a header kind.
    pub section_spans: Vec<SectionSpan>,
    sections: Vec<Section>,
}

impl SectionedDocument {
    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn section_of(&self, sentence_index: usize) -> Section {
        self.sections[sentence_index]
    }

    pub fn sentence_text(&self, index: usize) -> &str {
        &self.sentences[index].text
    }
}

pub fn partition_sections(doc: &FullTextDocument) -> SectionedDocument {
    partition_sections_with(doc, SectionSynonyms::builtin())
}

/// Split a full text into sentences and assign each to the section opened by
/// the closest preceding recognized header line. Text before the first header
/// and text of documents without headers belongs to [`Section::Other`].
/// Header lines themselves are not sentences.
pub fn partition_sections_with(
    doc: &FullTextDocument,
    synonyms: &SectionSynonyms,
) -> SectionedDocument {
    let text = doc.raw_text.as_str();
    // (section, byte range of body text)
    let mut segments: Vec<(Section, Range<usize>)> = Vec::new();
    let mut current = Section::Other;
    let mut seg_start = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if let Some(section) = synonyms.classify_header(line) {
            segments.push((current, seg_start..offset));
            current = section;
            seg_start = offset + line.len();
        }
        offset += line.len();
    }
    segments.push((current, seg_start..text.len()));

    let mut sentences = Vec::new();
    let mut sections = Vec::new();
    let mut section_spans: Vec<SectionSpan> = Vec::new();
    for (section, range) in segments {
        let body = &text[range.clone()];
        let first = sentences.len();
        for span in split_sentences(body) {
            let start = range.start + span.start;
            let end = range.start + span.end;
            let sentence_text = text[start..end].to_string();
            sentences.push(Sentence {
                start,
                end,
                tokens: tokenize(&sentence_text),
                text: sentence_text,
            });
            sections.push(section);
        }
        let last = sentences.len();
        if last == first {
            continue;
        }
        match section_spans.last_mut() {
            Some(prev) if prev.section == section => prev.sentences.end = last,
            _ => section_spans.push(SectionSpan {
                section,
                sentences: first..last,
            }),
        }
    }
    SectionedDocument {
        citing_paper_id: doc.citing_paper_id.clone(),
        sentences,
        section_spans,
        sections,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationOccurrence {
    pub sentence_index: usize,
    pub section: Section,
    pub match_text: String,
}

/// Surname of the cited first author: tokens of the last whitespace-separated
/// word of the author string.
pub fn surname_tokens(cited_author: &str) -> Vec<String> {
    cited_author
        .split_whitespace()
        .last()
        .map(tokenize)
        .unwrap_or_default()
}

fn contains_sequence(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Sentence sharing the most distinct tokens with `context`; ties go to the
/// earliest sentence. `None` for an empty document or a context without
/// tokens.
pub fn best_context_sentence(doc: &SectionedDocument, context: &str) -> Option<usize> {
    let context_tokens: HashSet<String> = tokenize(context).into_iter().collect();
    if context_tokens.is_empty() {
        return None;
    }
    let mut best: Option<(usize, usize)> = None;
    for (i, sentence) in doc.sentences.iter().enumerate() {
        let distinct: HashSet<&String> = sentence.tokens.iter().collect();
        let overlap = distinct
            .iter()
            .filter(|t| context_tokens.contains(**t))
            .count();
        if best.is_none_or(|(_, b)| overlap > b) {
            best = Some((i, overlap));
        }
    }
    best.map(|(i, _)| i)
}

/// All sentences that mention the cited first author's surname (whole-token,
/// case-insensitive), plus the sentence best matching `context`. Sorted by
/// sentence index without duplicates.
pub fn locate_citation_occurrences(
    doc: &SectionedDocument,
    cited_author: &str,
    context: &str,
) -> Result<Vec<CitationOccurrence>> {
    let surname = surname_tokens(cited_author);
    if surname.is_empty() && tokenize(context).is_empty() {
        return Err(Error::InvalidInput(
            "cannot locate a citation with neither a cited author nor a context".into(),
        ));
    }
    let mut found: BTreeMap<usize, String> = BTreeMap::new();
    for (i, sentence) in doc.sentences.iter().enumerate() {
        if contains_sequence(&sentence.tokens, &surname) {
            found.insert(i, surname.join(" "));
        }
    }
    if let Some(i) = best_context_sentence(doc, context) {
        found
            .entry(i)
            .or_insert_with(|| doc.sentences[i].text.clone());
    }
    Ok(found
        .into_iter()
        .map(|(sentence_index, match_text)| CitationOccurrence {
            sentence_index,
            section: doc.section_of(sentence_index),
            match_text,
        })
        .collect())
}

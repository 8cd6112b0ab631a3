//! Canonical document model: multi-source news corpora, sentences and tokens.
//!
//! Corpora are read from the `jsonl-v1` format (one report per line) and
//! normalized to UTC at minute precision. Documents are kept sorted by
//! `(source, publish_time, doc_id)` and each carries its rank within its
//! source's chronologically ordered reports.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Timelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at {location}: {reason}")]
    MalformedRecord { location: String, reason: String },
    #[error("duplicate doc_id `{0}`")]
    DuplicateDocId(String),
    #[error("unparsable timestamp `{value}` at {location}")]
    UnparsableTimestamp { location: String, value: String },
    #[error("unsupported corpus format `{0}` (expected jsonl-v1)")]
    UnsupportedFormat(String),
}

impl CorpusError {
    pub fn kind(&self) -> &'static str {
        match self {
            CorpusError::Io { .. } => "Io",
            CorpusError::MalformedRecord { .. } => "MalformedRecord",
            CorpusError::DuplicateDocId(_) => "DuplicateDocId",
            CorpusError::UnparsableTimestamp { .. } => "UnparsableTimestamp",
            CorpusError::UnsupportedFormat(_) => "UnsupportedFormat",
        }
    }
}

/// Half-open range of token indices within a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        TokenSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Smallest index difference between the two spans; 0 when they overlap.
    /// An empty span counts as the single position `start`.
    pub fn distance(&self, other: &TokenSpan) -> usize {
        let (a_lo, a_hi) = (self.start, self.end.max(self.start + 1) - 1);
        let (b_lo, b_hi) = (other.start, other.end.max(other.start + 1) - 1);
        if a_hi < b_lo {
            b_lo - a_hi
        } else {
            a_lo.saturating_sub(b_hi)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ne: Option<String>,
    /// Byte offsets into the sentence text.
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is_word(&self) -> bool {
        self.surface.chars().any(char::is_alphanumeric)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(index: usize, text: &str, analyzer: &Analyzer) -> Self {
        Sentence {
            index,
            text: text.to_string(),
            tokens: analyzer.tokenize(text),
        }
    }

    /// Text covered by a token span, taken from the original sentence.
    pub fn span_text(&self, span: TokenSpan) -> &str {
        if span.is_empty() || span.end > self.tokens.len() {
            return "";
        }
        &self.text[self.tokens[span.start].start..self.tokens[span.end - 1].end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub source: String,
    #[serde(with = "rfc3339")]
    pub publish_time: DateTime<Utc>,
    pub report_index: usize,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub event_id: String,
    pub documents: Vec<Document>,
    pub sources: BTreeSet<String>,
}

impl Corpus {
    /// Builds a corpus, sorting documents by `(source, publish_time, doc_id)`
    /// and assigning per-source report indices. Incoming `report_index`
    /// values are ignored.
    pub fn new(event_id: impl Into<String>, mut documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for doc in &documents {
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(CorpusError::DuplicateDocId(doc.doc_id.clone()));
            }
            if doc.sentences.is_empty() {
                return Err(CorpusError::MalformedRecord {
                    location: format!("doc_id {}", doc.doc_id),
                    reason: "document has no sentences".into(),
                });
            }
            if doc.source.is_empty() {
                return Err(CorpusError::MalformedRecord {
                    location: format!("doc_id {}", doc.doc_id),
                    reason: "empty source".into(),
                });
            }
        }
        documents.sort_by(|a, b| (&a.source, a.publish_time, &a.doc_id).cmp(&(&b.source, b.publish_time, &b.doc_id)));
        let mut sources = BTreeSet::new();
        let mut rank = 0;
        for i in 0..documents.len() {
            if i == 0 || documents[i - 1].source != documents[i].source {
                rank = 0;
            }
            let doc = &mut documents[i];
            doc.report_index = rank;
            rank += 1;
            for (k, sentence) in doc.sentences.iter_mut().enumerate() {
                sentence.index = k;
            }
            sources.insert(doc.source.clone());
        }
        Ok(Corpus {
            event_id: event_id.into(),
            documents,
            sources,
        })
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn doc_index(&self) -> HashMap<&str, &Document> {
        self.documents.iter().map(|d| (d.doc_id.as_str(), d)).collect()
    }

    /// Documents of one source in report order.
    pub fn reports<'a>(&'a self, source: &'a str) -> impl Iterator<Item = &'a Document> + 'a {
        self.documents.iter().filter(move |d| d.source == source)
    }

    /// Writes the tokenized corpus artifact: a header line followed by one
    /// document per line.
    pub fn write_artifact<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = ArtifactHeader {
            format: ARTIFACT_FORMAT.to_string(),
            event_id: self.event_id.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for doc in &self.documents {
            serde_json::to_writer(&mut out, doc)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_artifact(path: &Path) -> Result<Self, CorpusError> {
        let file = fs::File::open(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let location = |n: usize| format!("{}:{}", path.display(), n + 1);
        let header: ArtifactHeader = match lines.next() {
            Some((n, line)) => {
                let line = line.map_err(|source| CorpusError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                    location: location(n),
                    reason: e.to_string(),
                })?
            }
            None => {
                return Err(CorpusError::MalformedRecord {
                    location: location(0),
                    reason: "empty corpus artifact".into(),
                })
            }
        };
        if header.format != ARTIFACT_FORMAT {
            return Err(CorpusError::UnsupportedFormat(header.format));
        }
        let mut documents = Vec::new();
        for (n, line) in lines {
            let line = line.map_err(|source| CorpusError::Io {
                path: path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                location: location(n),
                reason: e.to_string(),
            })?;
            documents.push(doc);
        }
        Corpus::new(header.event_id, documents)
    }
}

const ARTIFACT_FORMAT: &str = "chronicle-corpus-v1";

#[derive(Serialize, Deserialize)]
struct ArtifactHeader {
    format: String,
    event_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    JsonlV1,
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl-v1" => Ok(CorpusFormat::JsonlV1),
            other => Err(CorpusError::UnsupportedFormat(other.to_string())),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusFormat::JsonlV1 => f.write_str("jsonl-v1"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawText {
    Sentences(Vec<String>),
    Raw(String),
}

#[derive(Deserialize)]
struct RawRecord {
    doc_id: Option<String>,
    source: Option<String>,
    publish_time: Option<String>,
    text: Option<RawText>,
}

/// Loads a raw corpus file. The event id is the file stem.
pub fn load_corpus(path: &Path, format: CorpusFormat, analyzer: &Analyzer) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let event_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "event".to_string());
    parse_corpus(&text, &event_id, format, analyzer, &path.display().to_string())
}

pub fn parse_corpus(
    text: &str,
    event_id: &str,
    format: CorpusFormat,
    analyzer: &Analyzer,
    origin: &str,
) -> Result<Corpus, CorpusError> {
    let CorpusFormat::JsonlV1 = format;
    let mut documents = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{origin}:{}", n + 1);
        let malformed = |reason: String| CorpusError::MalformedRecord {
            location: location.clone(),
            reason,
        };
        let record: RawRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let doc_id = record
            .doc_id
            .filter(|s| !s.is_empty())
            .ok_or_else(|| malformed("missing field `doc_id`".into()))?;
        let source = record
            .source
            .filter(|s| !s.is_empty())
            .ok_or_else(|| malformed("missing field `source`".into()))?;
        let raw_time = record
            .publish_time
            .ok_or_else(|| malformed("missing field `publish_time`".into()))?;
        let publish_time = parse_timestamp(&raw_time).ok_or_else(|| CorpusError::UnparsableTimestamp {
            location: location.clone(),
            value: raw_time.clone(),
        })?;
        let lines: Vec<String> = match record.text {
            Some(RawText::Sentences(list)) => list,
            Some(RawText::Raw(raw)) => raw.lines().map(str::to_string).collect(),
            None => return Err(malformed("missing field `text`".into())),
        };
        let sentences: Vec<Sentence> = lines
            .iter()
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .enumerate()
            .map(|(i, s)| Sentence::new(i, s, analyzer))
            .collect();
        if sentences.is_empty() {
            return Err(malformed("document has no sentences".into()));
        }
        documents.push(Document {
            doc_id,
            source,
            publish_time,
            report_index: 0,
            sentences,
        });
    }
    Corpus::new(event_id, documents)
}

/// Parses an RFC 3339 timestamp, converts it to UTC and truncates it to the minute.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let t = DateTime::parse_from_rfc3339(raw.trim()).ok()?.with_timezone(&Utc);
    Some(truncate_to_minute(t))
}

pub fn truncate_to_minute(t: DateTime<Utc>) -> DateTime<Utc> {
    t.with_second(0).and_then(|t| t.with_nanosecond(0)).unwrap_or(t)
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub(crate) mod rfc3339 {
    use chrono::{DateTime, Utc};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_timestamp(&raw).ok_or_else(|| de::Error::custom(format!("invalid timestamp `{raw}`")))
    }
}

/// Surface → lemma table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: HashMap<String, String>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, surface: &str, lemma: &str) {
        self.entries.insert(surface.to_string(), lemma.to_string());
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let mut lexicon = Lexicon::new();
        for (surface, lemma) in read_tsv_pairs(path)? {
            lexicon.insert(&surface, &lemma);
        }
        Ok(lexicon)
    }

    /// Exact surface first, then the lowercased surface. Unknown words map to
    /// their lowercased form.
    pub fn lemma(&self, surface: &str) -> String {
        if let Some(lemma) = self.entries.get(surface) {
            return lemma.clone();
        }
        let lower = surface.to_lowercase();
        self.entries.get(&lower).cloned().unwrap_or(lower)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Multi-word named-entity list, matched greedily longest-first over tokens.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    // first token (lowercased) -> entries sorted by decreasing length
    by_head: HashMap<String, Vec<(Vec<String>, String)>>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, surface: &str, label: &str) {
        let words: Vec<String> = segment(surface)
            .into_iter()
            .map(|(s, e)| surface[s..e].to_lowercase())
            .collect();
        if words.is_empty() {
            return;
        }
        let bucket = self.by_head.entry(words[0].clone()).or_default();
        bucket.retain(|(w, _)| *w != words);
        bucket.push((words, label.to_string()));
        bucket.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let mut gazetteer = Gazetteer::new();
        for (surface, label) in read_tsv_pairs(path)? {
            gazetteer.insert(&surface, &label);
        }
        Ok(gazetteer)
    }

    fn label(&self, tokens: &mut [Token]) {
        let mut i = 0;
        while i < tokens.len() {
            let head = tokens[i].surface.to_lowercase();
            let matched = self.by_head.get(&head).and_then(|entries| {
                entries.iter().find(|(words, _)| {
                    i + words.len() <= tokens.len()
                        && words
                            .iter()
                            .zip(&tokens[i..])
                            .all(|(w, t)| t.surface.to_lowercase() == *w)
                })
            });
            match matched {
                Some((words, label)) => {
                    for token in &mut tokens[i..i + words.len()] {
                        token.ne = Some(label.clone());
                    }
                    i += words.len();
                }
                None => i += 1,
            }
        }
    }
}

/// Lexicon plus gazetteer: everything needed to tokenize sentences.
#[derive(Debug, Clone, Default)]
pub struct Analyzer {
    pub lexicon: Lexicon,
    pub gazetteer: Gazetteer,
}

impl Analyzer {
    pub fn new(lexicon: Lexicon, gazetteer: Gazetteer) -> Self {
        Analyzer { lexicon, gazetteer }
    }

    pub fn tokenize(&self, text: &str) -> Vec<Token> {
        tokenize(text, &self.lexicon, &self.gazetteer)
    }
}

/// Rule-based tokenizer: words are alphanumeric runs that may contain
/// internal hyphens or apostrophes; every other non-space character is a
/// token of its own.
pub fn tokenize(text: &str, lexicon: &Lexicon, gazetteer: &Gazetteer) -> Vec<Token> {
    let mut tokens: Vec<Token> = segment(text)
        .into_iter()
        .map(|(start, end)| {
            let surface = &text[start..end];
            Token {
                surface: surface.to_string(),
                lemma: lexicon.lemma(surface),
                ne: None,
                start,
                end,
            }
        })
        .collect();
    gazetteer.label(&mut tokens);
    tokens
}

fn is_connector(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}')
}

/// Byte ranges of tokens in `text`.
pub(crate) fn segment(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |k: usize| if k < chars.len() { chars[k].0 } else { text.len() };
    let mut spans = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k].1;
        if c.is_whitespace() {
            k += 1;
        } else if c.is_alphanumeric() {
            let start = k;
            k += 1;
            while k < chars.len() {
                let c = chars[k].1;
                if c.is_alphanumeric() {
                    k += 1;
                } else if is_connector(c) && k + 1 < chars.len() && chars[k + 1].1.is_alphanumeric() {
                    k += 2;
                } else {
                    break;
                }
            }
            spans.push((chars[start].0, end_of(k)));
        } else {
            spans.push((chars[k].0, end_of(k + 1)));
            k += 1;
        }
    }
    spans
}

fn read_tsv_pairs(path: &Path) -> Result<Vec<(String, String)>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('\t') {
            Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => {
                pairs.push((a.trim().to_string(), b.trim().to_string()))
            }
            _ => {
                return Err(CorpusError::MalformedRecord {
                    location: format!("{}:{}", path.display(), n + 1),
                    reason: "expected `surface<TAB>value`".into(),
                })
            }
        }
    }
    Ok(pairs)
}

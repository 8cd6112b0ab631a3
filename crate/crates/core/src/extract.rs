//! Two-stage message extraction.
//!
//! Stage one decides a sentence's message type, either with trigger rules or
//! with a smoothed count-based classifier over lemma and named-entity
//! features. Stage two fills the type's slots with ontology instances found
//! in the sentence, nearest to the trigger first.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Corpus, Document, Sentence, TokenSpan};
use crate::ontology::dsl::{self, Statement, StatementKind};
use crate::ontology::{Args, DomainSpec, MessageTypeSpec, Ontology, OntologyError};
use crate::temporal::{self, TemporalGrammar, TimeAnchor};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{location}: malformed record: {reason}")]
    Malformed { location: String, reason: String },
    #[error("{location}: unknown message type `{name}`")]
    UnknownMessageType { location: String, name: String },
    #[error("{location}: message type `{message_type}` has no slot `{slot}`")]
    UnknownSlot {
        location: String,
        message_type: String,
        slot: String,
    },
    #[error("{location}: slot `{slot}` expects a `{expected}` but `{value}` is not one")]
    SlotTypeViolation {
        location: String,
        slot: String,
        value: String,
        expected: String,
    },
    #[error("{location}: constraint `{constraint}` violated")]
    ConstraintViolation { location: String, constraint: String },
    #[error("{location}: unparsable time anchor `{value}`")]
    UnparsableAnchor { location: String, value: String },
    #[error("{location}: unknown document `{doc_id}`")]
    UnknownDocument { location: String, doc_id: String },
    #[error("{location}: document `{doc_id}` has no sentence {sentence_index}")]
    SentenceOutOfRange {
        location: String,
        doc_id: String,
        sentence_index: usize,
    },
    #[error("{location}: second message for {doc_id}#{sentence_index}")]
    DuplicateMessage {
        location: String,
        doc_id: String,
        sentence_index: usize,
    },
}

impl ExtractError {
    pub fn kind(&self) -> &'static str {
        match self {
            ExtractError::Io { .. } => "Io",
            ExtractError::EmptyTrainingSet => "EmptyTrainingSet",
            ExtractError::Malformed { .. } => "MalformedRecord",
            ExtractError::UnknownMessageType { .. } => "UnknownMessageType",
            ExtractError::UnknownSlot { .. } => "UnknownSlot",
            ExtractError::SlotTypeViolation { .. } => "SlotTypeViolation",
            ExtractError::ConstraintViolation { .. } => "ConstraintViolation",
            ExtractError::UnparsableAnchor { .. } => "UnparsableAnchor",
            ExtractError::UnknownDocument { .. } => "UnknownDocument",
            ExtractError::SentenceOutOfRange { .. } => "SentenceOutOfRange",
            ExtractError::DuplicateMessage { .. } => "DuplicateMessage",
        }
    }
}

/// Identity of a message: one message per sentence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageRef {
    pub doc_id: String,
    pub sentence_index: usize,
}

impl std::fmt::Display for MessageRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.doc_id, self.sentence_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    #[serde(rename = "type")]
    pub msg_type: String,
    pub args: Args,
    pub time: TimeAnchor,
    pub source: String,
    pub doc_id: String,
    pub sentence_index: usize,
    pub report_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_span: Option<TokenSpan>,
}

impl Message {
    pub fn key(&self) -> MessageRef {
        MessageRef {
            doc_id: self.doc_id.clone(),
            sentence_index: self.sentence_index,
        }
    }

    /// Distinct argument values in slot order, `None` for unfilled slots.
    pub fn arg_tuple(&self) -> Vec<Option<&str>> {
        self.args.values().map(|v| v.as_deref()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerRule {
    pub msg_type: String,
    pub lemmas: Vec<String>,
    pub required_ne: Vec<String>,
}

impl TriggerRule {
    fn position(&self, sentence: &Sentence) -> Option<usize> {
        sentence
            .tokens
            .iter()
            .position(|t| self.lemmas.iter().any(|l| l.eq_ignore_ascii_case(&t.lemma)))
    }

    fn entities_present(&self, sentence: &Sentence) -> bool {
        self.required_ne
            .iter()
            .all(|label| sentence.tokens.iter().any(|t| t.ne.as_deref() == Some(label)))
    }

    pub fn to_spec_line(&self) -> String {
        let lemmas: Vec<String> = self.lemmas.iter().map(|l| dsl::quote_name(l)).collect();
        let mut line = format!("trigger {} on [{}]", dsl::quote_name(&self.msg_type), lemmas.join(", "));
        if !self.required_ne.is_empty() {
            let labels: Vec<String> = self.required_ne.iter().map(|l| dsl::quote_name(l)).collect();
            line.push_str(&format!(" requires [{}]", labels.join(", ")));
        }
        line
    }
}

pub fn load_trigger_rules(path: &Path, specs: &[MessageTypeSpec]) -> Result<Vec<TriggerRule>, OntologyError> {
    trigger_rules_from_statements(&crate::ontology::read_spec_file(path)?, specs)
}

pub(crate) fn trigger_rules_from_statements(
    statements: &[Statement],
    specs: &[MessageTypeSpec],
) -> Result<Vec<TriggerRule>, OntologyError> {
    let mut rules = Vec::new();
    for st in statements {
        if let StatementKind::Trigger {
            msg_type,
            lemmas,
            requires,
        } = &st.kind
        {
            if !specs.iter().any(|s| &s.name == msg_type) {
                return Err(OntologyError::UnknownMessageType {
                    name: msg_type.clone(),
                    line: st.line,
                });
            }
            rules.push(TriggerRule {
                msg_type: msg_type.clone(),
                lemmas: lemmas.clone(),
                required_ne: requires.clone(),
            });
        }
    }
    Ok(rules)
}

/// Features of a sentence: `lemma:<lemma>` per word token and `ne:<label>`
/// per entity-labelled token.
pub fn sentence_features(sentence: &Sentence) -> Vec<String> {
    let mut features = Vec::new();
    for token in &sentence.tokens {
        if token.is_word() {
            features.push(format!("lemma:{}", token.lemma.to_lowercase()));
        }
        if let Some(label) = &token.ne {
            features.push(format!("ne:{label}"));
        }
    }
    features
}

/// Multinomial count model with add-one smoothing. `None` is the
/// no-message class and always sorts last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub classes: Vec<Option<String>>,
    pub log_prior: Vec<f64>,
    /// feature → per-class log-likelihood, aligned with `classes`
    pub weights: BTreeMap<String, Vec<f64>>,
}

impl ClassifierModel {
    /// Unnormalized log scores per class.
    pub fn scores(&self, sentence: &Sentence) -> Vec<f64> {
        let mut scores = self.log_prior.clone();
        for feature in sentence_features(sentence) {
            if let Some(w) = self.weights.get(&feature) {
                for (s, w) in scores.iter_mut().zip(w) {
                    *s += w;
                }
            }
        }
        scores
    }

    pub fn posteriors(&self, sentence: &Sentence) -> Vec<(Option<String>, f64)> {
        let scores = self.scores(sentence);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        self.classes
            .iter()
            .cloned()
            .zip(scores.iter().map(|s| (s - max).exp() / total))
            .collect()
    }

    /// Highest-scoring class; ties go to the earlier class.
    pub fn predict(&self, sentence: &Sentence) -> Option<String> {
        let scores = self.scores(sentence);
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        self.classes.get(best).cloned().flatten()
    }
}

/// Trains the classifier. Classes are ordered by `type_order`, then any
/// other observed labels alphabetically, then `None`.
pub fn train_classifier(
    examples: &[(Sentence, Option<String>)],
    type_order: &[String],
) -> Result<ClassifierModel, ExtractError> {
    if examples.is_empty() {
        return Err(ExtractError::EmptyTrainingSet);
    }
    let observed: BTreeSet<Option<&str>> = examples.iter().map(|(_, l)| l.as_deref()).collect();
    let mut classes: Vec<Option<String>> = type_order
        .iter()
        .filter(|t| observed.contains(&Some(t.as_str())))
        .map(|t| Some(t.clone()))
        .collect();
    for label in observed.iter().flatten() {
        if !type_order.iter().any(|t| t == label) {
            classes.push(Some(label.to_string()));
        }
    }
    if observed.contains(&None) {
        classes.push(None);
    }
    let class_index: HashMap<Option<&str>, usize> =
        classes.iter().enumerate().map(|(i, c)| (c.as_deref(), i)).collect();

    let mut doc_counts = vec![0u64; classes.len()];
    let mut feature_counts: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    let mut totals = vec![0u64; classes.len()];
    for (sentence, label) in examples {
        let c = class_index[&label.as_deref()];
        doc_counts[c] += 1;
        for f in sentence_features(sentence) {
            feature_counts.entry(f).or_insert_with(|| vec![0; classes.len()])[c] += 1;
            totals[c] += 1;
        }
    }
    let vocab = feature_counts.len() as f64;
    let n = examples.len() as f64;
    let log_prior = doc_counts.iter().map(|&d| (d as f64 / n).ln()).collect();
    let weights = feature_counts
        .into_iter()
        .map(|(f, counts)| {
            let w = counts
                .iter()
                .zip(&totals)
                .map(|(&k, &total)| ((k as f64 + 1.0) / (total as f64 + vocab)).ln())
                .collect();
            (f, w)
        })
        .collect();
    Ok(ClassifierModel {
        classes,
        log_prior,
        weights,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainingRecord {
    text: String,
    label: Option<String>,
}

/// Reads labelled sentences, one `{"text", "label"}` object per line. A null
/// label marks a sentence that carries no message.
pub fn load_training_examples(
    path: &Path,
    analyzer: &corpus::Analyzer,
) -> Result<Vec<(Sentence, Option<String>)>, ExtractError> {
    let text = fs::read_to_string(path).map_err(|source| ExtractError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut examples = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TrainingRecord = serde_json::from_str(line).map_err(|e| ExtractError::Malformed {
            location: format!("{}:{}", path.display(), n + 1),
            reason: e.to_string(),
        })?;
        examples.push((Sentence::new(examples.len(), &record.text, analyzer), record.label));
    }
    Ok(examples)
}

#[derive(Debug, Clone)]
pub enum Classifier {
    Rules,
    Statistical(ClassifierModel),
}

/// Stage one. Rules mode takes the first rule (file order) whose trigger
/// lemma occurs and whose entity requirements are met.
pub fn classify_sentence(sentence: &Sentence, classifier: &Classifier, triggers: &[TriggerRule]) -> Option<String> {
    match classifier {
        Classifier::Rules => triggers
            .iter()
            .find(|r| r.position(sentence).is_some() && r.entities_present(sentence))
            .map(|r| r.msg_type.clone()),
        Classifier::Statistical(model) => model.predict(sentence),
    }
}

/// First token matching any trigger lemma of `msg_type`. Depends only on
/// the sentence and type, so both classifier modes fill arguments alike.
pub fn locate_trigger(sentence: &Sentence, msg_type: &str, triggers: &[TriggerRule]) -> Option<TokenSpan> {
    triggers
        .iter()
        .filter(|r| r.msg_type == msg_type)
        .filter_map(|r| r.position(sentence))
        .min()
        .map(|p| TokenSpan::new(p, p + 1))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub span: TokenSpan,
    pub instance: String,
}

/// Surface forms of ontology instances, matched over tokens greedily
/// longest-first.
#[derive(Debug, Clone)]
pub struct InstanceIndex {
    by_head: HashMap<String, Vec<(Vec<String>, String)>>,
}

impl InstanceIndex {
    pub fn new(ontology: &Ontology) -> Self {
        let mut by_head: HashMap<String, Vec<(Vec<String>, String)>> = HashMap::new();
        for (name, def) in ontology.instances() {
            let forms = std::iter::once(name.replace('_', " ")).chain(def.aliases.iter().cloned());
            for form in forms {
                let words: Vec<String> = corpus::segment(&form)
                    .into_iter()
                    .map(|(s, e)| form[s..e].to_lowercase())
                    .collect();
                if let Some(head) = words.first() {
                    by_head.entry(head.clone()).or_default().push((words, name.to_string()));
                }
            }
        }
        for entries in by_head.values_mut() {
            entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(&b.1)));
            entries.dedup();
        }
        InstanceIndex { by_head }
    }

    pub fn mentions(&self, sentence: &Sentence) -> Vec<Mention> {
        let tokens = &sentence.tokens;
        let matches = |i: usize, w: &String| {
            let t = &tokens[i];
            t.surface.to_lowercase() == *w || t.lemma.to_lowercase() == *w
        };
        let mut found = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let mut hit = None;
            for key in [tokens[i].surface.to_lowercase(), tokens[i].lemma.to_lowercase()] {
                if let Some(entries) = self.by_head.get(&key) {
                    for (words, name) in entries {
                        let fits =
                            i + words.len() <= tokens.len() && words.iter().enumerate().all(|(k, w)| matches(i + k, w));
                        if fits
                            && hit
                                .as_ref()
                                .is_none_or(|(len, _): &(usize, &String)| words.len() > *len)
                        {
                            hit = Some((words.len(), name));
                        }
                    }
                }
            }
            match hit {
                Some((len, name)) => {
                    found.push(Mention {
                        span: TokenSpan::new(i, i + len),
                        instance: name.clone(),
                    });
                    i += len;
                }
                None => i += 1,
            }
        }
        found
    }
}

/// Stage two. Slots are filled in spec order with the type-compatible
/// mention nearest the trigger (leftmost on ties); a mention fills at most
/// one slot.
pub fn fill_arguments(
    sentence: &Sentence,
    spec: &MessageTypeSpec,
    ontology: &Ontology,
    index: &InstanceIndex,
    trigger: Option<TokenSpan>,
) -> Args {
    let focus = trigger.unwrap_or(TokenSpan::new(0, 0));
    let mentions = index.mentions(sentence);
    let mut used = vec![false; mentions.len()];
    let mut args = Args::new();
    for slot in &spec.slots {
        let pick = mentions
            .iter()
            .enumerate()
            .filter(|(i, m)| !used[*i] && ontology.instance_of(&m.instance, &slot.concept))
            .min_by_key(|(_, m)| (m.span.distance(&focus), m.span.start))
            .map(|(i, _)| i);
        let value = pick.map(|i| {
            used[i] = true;
            mentions[i].instance.clone()
        });
        args.insert(slot.name.clone(), value);
    }
    args
}

#[derive(Debug, Clone)]
pub struct ExtractorConfig {
    pub classifier: Classifier,
    pub triggers: Vec<TriggerRule>,
    pub grammar: TemporalGrammar,
}

impl ExtractorConfig {
    pub fn rules(domain: &DomainSpec) -> Self {
        ExtractorConfig {
            classifier: Classifier::Rules,
            triggers: domain.triggers.clone(),
            grammar: TemporalGrammar::default(),
        }
    }
}

/// At most one message per sentence; sentences whose filled arguments break
/// a type constraint are dropped and logged.
pub fn extract_messages(document: &Document, domain: &DomainSpec, config: &ExtractorConfig) -> Vec<Message> {
    let index = InstanceIndex::new(&domain.ontology);
    extract_with_index(document, domain, config, &index)
}

fn extract_with_index(
    document: &Document,
    domain: &DomainSpec,
    config: &ExtractorConfig,
    index: &InstanceIndex,
) -> Vec<Message> {
    let mut messages = Vec::new();
    for sentence in &document.sentences {
        let Some(msg_type) = classify_sentence(sentence, &config.classifier, &config.triggers) else {
            continue;
        };
        let Some(spec) = domain.message_spec(&msg_type) else {
            log::warn!(
                "{}#{}: classifier produced unknown type `{msg_type}`",
                document.doc_id,
                sentence.index
            );
            continue;
        };
        let trigger = locate_trigger(sentence, &msg_type, &config.triggers);
        let args = fill_arguments(sentence, spec, &domain.ontology, index, trigger);
        if let Err(violated) = spec.constraints_hold(&args, &domain.ontology) {
            log::info!(
                "{}#{}: dropping `{msg_type}` message, constraint `{}` violated",
                document.doc_id,
                sentence.index,
                violated
            );
            continue;
        }
        let time = temporal::message_time(sentence, trigger, document.publish_time, &config.grammar);
        messages.push(Message {
            msg_type,
            args,
            time,
            source: document.source.clone(),
            doc_id: document.doc_id.clone(),
            sentence_index: sentence.index,
            report_index: document.report_index,
            trigger_span: trigger,
        });
    }
    messages
}

/// Extracts every document, then validates the whole output.
pub fn extract_corpus(
    corpus: &Corpus,
    domain: &DomainSpec,
    config: &ExtractorConfig,
) -> Result<Vec<Message>, ExtractError> {
    let index = InstanceIndex::new(&domain.ontology);
    let messages: Vec<Message> = corpus
        .documents
        .iter()
        .flat_map(|d| extract_with_index(d, domain, config, &index))
        .collect();
    for m in &messages {
        validate_message(m, domain, &m.key().to_string())?;
    }
    Ok(messages)
}

/// Type, slot concepts and cross-slot constraints.
pub fn validate_message(message: &Message, domain: &DomainSpec, location: &str) -> Result<(), ExtractError> {
    let spec = domain
        .message_spec(&message.msg_type)
        .ok_or_else(|| ExtractError::UnknownMessageType {
            location: location.to_string(),
            name: message.msg_type.clone(),
        })?;
    for key in message.args.keys() {
        if spec.slot(key).is_none() {
            return Err(ExtractError::UnknownSlot {
                location: location.to_string(),
                message_type: spec.name.clone(),
                slot: key.clone(),
            });
        }
    }
    for slot in &spec.slots {
        match message.args.get(&slot.name) {
            None => {
                return Err(ExtractError::Malformed {
                    location: location.to_string(),
                    reason: format!("slot `{}` missing (use null for unfilled)", slot.name),
                })
            }
            Some(Some(value)) if !domain.ontology.instance_of(value, &slot.concept) => {
                return Err(ExtractError::SlotTypeViolation {
                    location: location.to_string(),
                    slot: slot.name.clone(),
                    value: value.clone(),
                    expected: slot.concept.clone(),
                })
            }
            _ => {}
        }
    }
    spec.constraints_hold(&message.args, &domain.ontology)
        .map_err(|c| ExtractError::ConstraintViolation {
            location: location.to_string(),
            constraint: c.to_string(),
        })
}

#[derive(Deserialize)]
struct GoldRecord {
    doc_id: String,
    sentence_index: usize,
    #[serde(rename = "type")]
    msg_type: String,
    #[serde(default)]
    args: BTreeMap<String, Option<String>>,
    #[serde(default)]
    time: Option<String>,
}

/// Reads hand-authored messages (`messages-jsonl-v1`). Absent slots are
/// null; absent `time` means the publication day.
pub fn load_gold_messages(path: &Path, corpus: &Corpus, domain: &DomainSpec) -> Result<Vec<Message>, ExtractError> {
    let text = fs::read_to_string(path).map_err(|source| ExtractError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_gold_messages(&text, corpus, domain, &path.display().to_string())
}

pub fn parse_gold_messages(
    text: &str,
    corpus: &Corpus,
    domain: &DomainSpec,
    origin: &str,
) -> Result<Vec<Message>, ExtractError> {
    let docs = corpus.doc_index();
    let mut seen = HashSet::new();
    let mut messages = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{origin}:{}", n + 1);
        let record: GoldRecord = serde_json::from_str(line).map_err(|e| ExtractError::Malformed {
            location: location.clone(),
            reason: e.to_string(),
        })?;
        let doc = docs
            .get(record.doc_id.as_str())
            .ok_or_else(|| ExtractError::UnknownDocument {
                location: location.clone(),
                doc_id: record.doc_id.clone(),
            })?;
        if record.sentence_index >= doc.sentences.len() {
            return Err(ExtractError::SentenceOutOfRange {
                location,
                doc_id: record.doc_id,
                sentence_index: record.sentence_index,
            });
        }
        let spec = domain
            .message_spec(&record.msg_type)
            .ok_or_else(|| ExtractError::UnknownMessageType {
                location: location.clone(),
                name: record.msg_type.clone(),
            })?;
        let mut args = record.args;
        for slot in &spec.slots {
            args.entry(slot.name.clone()).or_insert(None);
        }
        let time = match &record.time {
            Some(raw) => TimeAnchor::parse(raw).map_err(|_| ExtractError::UnparsableAnchor {
                location: location.clone(),
                value: raw.clone(),
            })?,
            None => TimeAnchor::day(doc.publish_time.date_naive()),
        };
        let message = Message {
            msg_type: record.msg_type,
            args,
            time,
            source: doc.source.clone(),
            doc_id: record.doc_id,
            sentence_index: record.sentence_index,
            report_index: doc.report_index,
            trigger_span: None,
        };
        validate_message(&message, domain, &location)?;
        if !seen.insert(message.key()) {
            return Err(ExtractError::DuplicateMessage {
                location,
                doc_id: message.doc_id,
                sentence_index: message.sentence_index,
            });
        }
        messages.push(message);
    }
    Ok(messages)
}

pub fn write_messages<W: Write>(messages: &[Message], mut out: W) -> std::io::Result<()> {
    for m in messages {
        serde_json::to_writer(&mut out, m)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a messages artifact written by [`write_messages`].
pub fn read_messages(path: &Path, domain: &DomainSpec) -> Result<Vec<Message>, ExtractError> {
    let text = fs::read_to_string(path).map_err(|source| ExtractError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut messages = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{}:{}", path.display(), n + 1);
        let m: Message = serde_json::from_str(line).map_err(|e| ExtractError::Malformed {
            location: location.clone(),
            reason: e.to_string(),
        })?;
        validate_message(&m, domain, &location)?;
        messages.push(m);
    }
    Ok(messages)
}

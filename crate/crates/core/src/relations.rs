//! Synchronic and diachronic relations between messages.
//!
//! Synchronic candidates are cross-source pairs whose time anchors overlap
//! once each is dilated by half the window width. Diachronic candidates are
//! same-source pairs with strictly increasing anchor start; their distance
//! counts report steps within the source.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::duration::{self, DurationError};
use crate::extract::{Message, MessageRef};
use crate::ontology::{Axis, Ontology, RelationSpec};
use crate::temporal::TimeAnchor;

#[derive(Debug, Error)]
pub enum RelationError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}: malformed relation record: {reason}")]
    Malformed { location: String, reason: String },
    #[error("{location}: relation refers to unknown message {message}")]
    UnknownMessage { location: String, message: MessageRef },
    #[error(transparent)]
    Window(#[from] DurationError),
}

impl RelationError {
    pub fn kind(&self) -> &'static str {
        match self {
            RelationError::Io { .. } => "Io",
            RelationError::Malformed { .. } => "MalformedRecord",
            RelationError::UnknownMessage { .. } => "UnknownMessage",
            RelationError::Window(_) => "InvalidWindow",
        }
    }
}

/// Synchronic alignment tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPolicy {
    pub width_minutes: i64,
}

impl WindowPolicy {
    pub fn new(width_minutes: i64) -> Self {
        assert!(width_minutes >= 0, "window width must be non-negative");
        WindowPolicy { width_minutes }
    }

    /// Accepts `Nm`, `Nh` or `Nd`.
    pub fn parse(raw: &str) -> Result<Self, DurationError> {
        duration::parse_minutes(raw).map(WindowPolicy::new)
    }

    /// Dilating both intervals by `width / 2` and testing overlap is the same
    /// as bounding the gap between them by `width`.
    pub fn compatible(&self, a: &TimeAnchor, b: &TimeAnchor) -> bool {
        gap_minutes(a, b) <= self.width_minutes
    }
}

impl std::fmt::Display for WindowPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&duration::format_minutes(self.width_minutes))
    }
}

/// Minutes between two anchors; zero or negative when they overlap.
pub fn gap_minutes(a: &TimeAnchor, b: &TimeAnchor) -> i64 {
    a.first_minute().max(b.first_minute()) - a.last_minute().min(b.last_minute())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationInstance {
    pub name: String,
    pub axis: Axis,
    pub left: MessageRef,
    pub right: MessageRef,
    /// Report steps from left to right; diachronic only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<i64>,
}

/// All ordered cross-source pairs with compatible anchors.
pub fn synchronic_pairs<'a>(messages: &'a [Message], window: &WindowPolicy) -> Vec<(&'a Message, &'a Message)> {
    let mut order: Vec<&Message> = messages.iter().collect();
    order.sort_by_key(|m| m.time.first_minute());
    let mut pairs = Vec::new();
    for (i, a) in order.iter().enumerate() {
        let reach = a.time.last_minute() + window.width_minutes;
        for b in order[i + 1..].iter().take_while(|b| b.time.first_minute() <= reach) {
            if a.source != b.source {
                pairs.push((*a, *b));
                pairs.push((*b, *a));
            }
        }
    }
    pairs
}

/// Same-source pairs `(earlier, later)` with strictly increasing anchor
/// start, and their report distance.
pub fn diachronic_pairs(messages: &[Message]) -> Vec<(&Message, &Message, i64)> {
    let mut by_source: HashMap<&str, Vec<&Message>> = HashMap::new();
    for m in messages {
        by_source.entry(m.source.as_str()).or_default().push(m);
    }
    let mut sources: Vec<_> = by_source.into_iter().collect();
    sources.sort_by(|a, b| a.0.cmp(b.0));
    let mut pairs = Vec::new();
    for (_, mut group) in sources {
        group.sort_by_key(|m| m.time.start);
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                if a.time.start < b.time.start {
                    pairs.push((*a, *b, b.report_index as i64 - a.report_index as i64));
                }
            }
        }
    }
    pairs
}

fn emit(
    out: &mut BTreeSet<RelationInstance>,
    spec: &RelationSpec,
    left: &Message,
    right: &Message,
    distance: Option<i64>,
) {
    out.insert(RelationInstance {
        name: spec.name.clone(),
        axis: spec.axis,
        left: left.key(),
        right: right.key(),
        distance,
    });
}

/// Every instance of every spec, deduplicated and in canonical order.
pub fn evaluate_relations(
    messages: &[Message],
    specs: &[RelationSpec],
    window: &WindowPolicy,
    ontology: &Ontology,
) -> Vec<RelationInstance> {
    let mut by_types: HashMap<(Axis, &str, &str), Vec<&RelationSpec>> = HashMap::new();
    for spec in specs {
        by_types
            .entry((spec.axis, spec.left_type.as_str(), spec.right_type.as_str()))
            .or_default()
            .push(spec);
    }
    let mut out = BTreeSet::new();
    if by_types.keys().any(|k| k.0 == Axis::Synchronic) {
        for (a, b) in synchronic_pairs(messages, window) {
            let Some(candidates) = by_types.get(&(Axis::Synchronic, a.msg_type.as_str(), b.msg_type.as_str())) else {
                continue;
            };
            for spec in candidates {
                if spec.conditions_hold(&a.args, &b.args, ontology) {
                    emit(&mut out, spec, a, b, None);
                    if spec.symmetric {
                        emit(&mut out, spec, b, a, None);
                    }
                }
            }
        }
    }
    if by_types.keys().any(|k| k.0 == Axis::Diachronic) {
        for (a, b, d) in diachronic_pairs(messages) {
            let Some(candidates) = by_types.get(&(Axis::Diachronic, a.msg_type.as_str(), b.msg_type.as_str())) else {
                continue;
            };
            for spec in candidates {
                if spec.distance.is_none_or(|c| c.admits(d)) && spec.conditions_hold(&a.args, &b.args, ontology) {
                    emit(&mut out, spec, a, b, Some(d));
                }
            }
        }
    }
    sort_instances(out.into_iter().collect(), messages)
}

/// Canonical order: axis, name, left anchor, left message, right message.
pub fn sort_instances(mut instances: Vec<RelationInstance>, messages: &[Message]) -> Vec<RelationInstance> {
    let anchors: HashMap<MessageRef, (i64, i64)> = messages
        .iter()
        .map(|m| (m.key(), (m.time.first_minute(), m.time.last_minute())))
        .collect();
    instances.sort_by(|x, y| {
        (x.axis, &x.name, anchors.get(&x.left), &x.left, &x.right, x.distance).cmp(&(
            y.axis,
            &y.name,
            anchors.get(&y.left),
            &y.left,
            &y.right,
            y.distance,
        ))
    });
    instances
}

/// A message that no other source covers with a compatible message of the
/// same type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EllipsisReport {
    pub message: MessageRef,
    pub msg_type: String,
    pub source: String,
    pub bucket: usize,
    pub silent_sources: Vec<String>,
    /// Every other source is silent.
    pub uncovered: bool,
}

pub fn detect_ellipsis(messages: &[Message], sources: &BTreeSet<String>, window: &WindowPolicy) -> Vec<EllipsisReport> {
    let buckets = bucketize(messages, window);
    let bucket_of: HashMap<MessageRef, usize> = buckets
        .iter()
        .flat_map(|b| b.members.iter().map(move |m| (m.clone(), b.index)))
        .collect();
    let mut covered: HashMap<MessageRef, BTreeSet<&str>> = HashMap::new();
    for (a, b) in synchronic_pairs(messages, window) {
        if a.msg_type == b.msg_type {
            covered.entry(a.key()).or_default().insert(b.source.as_str());
        }
    }
    let by_key: HashMap<MessageRef, &Message> = messages.iter().map(|m| (m.key(), m)).collect();
    let mut reports = Vec::new();
    for bucket in &buckets {
        for key in &bucket.members {
            let m = by_key[key];
            let seen = covered.get(key);
            let others: Vec<&String> = sources.iter().filter(|s| **s != m.source).collect();
            let silent: Vec<String> = others
                .iter()
                .filter(|s| !seen.is_some_and(|c| c.contains(s.as_str())))
                .map(|s| s.to_string())
                .collect();
            if !silent.is_empty() {
                reports.push(EllipsisReport {
                    message: key.clone(),
                    msg_type: m.msg_type.clone(),
                    source: m.source.clone(),
                    bucket: bucket_of[key],
                    uncovered: silent.len() == others.len(),
                    silent_sources: silent,
                });
            }
        }
    }
    reports
}

/// A maximal run of messages chained by window compatibility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub index: usize,
    pub first_minute: i64,
    pub last_minute: i64,
    pub members: Vec<MessageRef>,
}

impl Bucket {
    /// `[2004-09-09]` or `[2004-09-09 to 2004-09-12]`.
    pub fn label(&self) -> String {
        let day = |minute: i64| {
            chrono::DateTime::from_timestamp(minute * 60, 0)
                .expect("minute in range")
                .date_naive()
        };
        let (a, b) = (day(self.first_minute), day(self.last_minute));
        if a == b {
            format!("[{a}]")
        } else {
            format!("[{a} to {b}]")
        }
    }
}

/// Single-linkage grouping in anchor order. Any two window-compatible
/// messages land in the same bucket.
pub fn bucketize(messages: &[Message], window: &WindowPolicy) -> Vec<Bucket> {
    let mut order: Vec<&Message> = messages.iter().collect();
    order.sort_by(|a, b| {
        (a.time.first_minute(), a.time.last_minute(), a.key()).cmp(&(
            b.time.first_minute(),
            b.time.last_minute(),
            b.key(),
        ))
    });
    let mut buckets: Vec<Bucket> = Vec::new();
    for m in order {
        let (first, last) = (m.time.first_minute(), m.time.last_minute());
        match buckets.last_mut() {
            Some(b) if first - b.last_minute <= window.width_minutes => {
                b.last_minute = b.last_minute.max(last);
                b.members.push(m.key());
            }
            _ => buckets.push(Bucket {
                index: buckets.len(),
                first_minute: first,
                last_minute: last,
                members: vec![m.key()],
            }),
        }
    }
    buckets
}

pub fn write_relations<W: Write>(relations: &[RelationInstance], mut out: W) -> std::io::Result<()> {
    for r in relations {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a relations artifact; every endpoint must be among `messages`.
pub fn read_relations(path: &Path, messages: &[Message]) -> Result<Vec<RelationInstance>, RelationError> {
    let text = fs::read_to_string(path).map_err(|source| RelationError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let known: BTreeSet<MessageRef> = messages.iter().map(Message::key).collect();
    let mut relations = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{}:{}", path.display(), n + 1);
        let r: RelationInstance = serde_json::from_str(line).map_err(|e| RelationError::Malformed {
            location: location.clone(),
            reason: e.to_string(),
        })?;
        for end in [&r.left, &r.right] {
            if !known.contains(end) {
                return Err(RelationError::UnknownMessage {
                    location,
                    message: end.clone(),
                });
            }
        }
        relations.push(r);
    }
    Ok(relations)
}

/// Naive reference evaluation for cross-checking.
pub mod oracle {
    use std::collections::BTreeSet;

    use super::RelationInstance;
    use crate::extract::Message;
    use crate::ontology::{Args, Axis, ConditionAtom, DistanceConstraint, Ontology, RelationSpec, SideTag, SlotRef};
    use crate::relations::WindowPolicy;

    fn fetch<'a>(r: &SlotRef, left: &'a Args, right: &'a Args) -> Option<&'a String> {
        let args = if r.side == SideTag::Left { left } else { right };
        args.get(&r.slot)?.as_ref()
    }

    fn rank(ontology: &Ontology, scale: &str, value: &str) -> Option<usize> {
        ontology.scale(scale)?.iter().position(|v| v == value)
    }

    fn holds(atom: &ConditionAtom, left: &Args, right: &Args, ontology: &Ontology) -> bool {
        match atom {
            ConditionAtom::SlotEq { left: a, right: b } => match (fetch(a, left, right), fetch(b, left, right)) {
                (Some(x), Some(y)) => x == y,
                _ => false,
            },
            ConditionAtom::SlotNeq { left: a, right: b } => match (fetch(a, left, right), fetch(b, left, right)) {
                (Some(x), Some(y)) => x != y,
                _ => false,
            },
            ConditionAtom::SlotLt {
                left: a,
                right: b,
                scale,
            } => match (fetch(a, left, right), fetch(b, left, right)) {
                (Some(x), Some(y)) => match (rank(ontology, scale, x), rank(ontology, scale, y)) {
                    (Some(i), Some(j)) => i < j,
                    _ => false,
                },
                _ => false,
            },
            ConditionAtom::SlotGt {
                left: a,
                right: b,
                scale,
            } => match (fetch(a, left, right), fetch(b, left, right)) {
                (Some(x), Some(y)) => match (rank(ontology, scale, x), rank(ontology, scale, y)) {
                    (Some(i), Some(j)) => i > j,
                    _ => false,
                },
                _ => false,
            },
            ConditionAtom::SlotConst { slot, value } => fetch(slot, left, right) == Some(value),
        }
    }

    /// Each anchor as a closed minute interval, widened by half the window
    /// on both sides (in half-minutes to stay integral).
    fn dilated_overlap(a: &Message, b: &Message, window: &WindowPolicy) -> bool {
        let w = window.width_minutes;
        let (a0, a1) = (2 * a.time.first_minute() - w, 2 * a.time.last_minute() + w);
        let (b0, b1) = (2 * b.time.first_minute() - w, 2 * b.time.last_minute() + w);
        a0 <= b1 && b0 <= a1
    }

    /// Tries every ordered message pair against every spec.
    pub fn brute_force_oracle(
        messages: &[Message],
        specs: &[RelationSpec],
        window: &WindowPolicy,
        ontology: &Ontology,
    ) -> BTreeSet<RelationInstance> {
        let mut out = BTreeSet::new();
        for a in messages {
            for b in messages {
                if std::ptr::eq(a, b) {
                    continue;
                }
                for spec in specs {
                    if a.msg_type != spec.left_type || b.msg_type != spec.right_type {
                        continue;
                    }
                    if !spec.conditions.iter().all(|c| holds(c, &a.args, &b.args, ontology)) {
                        continue;
                    }
                    match spec.axis {
                        Axis::Synchronic => {
                            if a.source != b.source && dilated_overlap(a, b, window) {
                                let make = |l: &Message, r: &Message| RelationInstance {
                                    name: spec.name.clone(),
                                    axis: Axis::Synchronic,
                                    left: l.key(),
                                    right: r.key(),
                                    distance: None,
                                };
                                out.insert(make(a, b));
                                if spec.symmetric {
                                    out.insert(make(b, a));
                                }
                            }
                        }
                        Axis::Diachronic => {
                            let d = b.report_index as i64 - a.report_index as i64;
                            let distance_ok = match spec.distance {
                                None => true,
                                Some(DistanceConstraint::Exactly(k)) => d == k,
                                Some(DistanceConstraint::AtLeast(k)) => d >= k,
                            };
                            if a.source == b.source && a.time.start < b.time.start && distance_ok {
                                out.insert(RelationInstance {
                                    name: spec.name.clone(),
                                    axis: Axis::Diachronic,
                                    left: a.key(),
                                    right: b.key(),
                                    distance: Some(d),
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

//! Domain schema: concept taxonomy, instances, ordered scales, message type
//! specifications and declarative relation rules.
//!
//! Everything is loaded from the line-oriented spec-file format parsed in
//! [`dsl`]. A single file may hold every statement kind; each loader picks
//! the statements it owns and ignores the rest.

pub mod dsl;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dsl::Side;
use dsl::{AtomAst, DistanceAst, RhsAst, Statement, StatementKind};

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cycle in taxonomy through concept `{0}`")]
    CycleInTaxonomy(String),
    #[error("line {line}: unknown concept `{name}`")]
    UnknownConcept { name: String, line: usize },
    #[error("line {line}: concept `{name}` declared twice")]
    DuplicateConcept { name: String, line: usize },
    #[error("line {line}: instance `{name}` declared twice")]
    DuplicateInstance { name: String, line: usize },
    #[error("line {line}: invalid scale for `{concept}`: {reason}")]
    InvalidScale {
        concept: String,
        line: usize,
        reason: String,
    },
    #[error("line {line}: message type `{name}` declared twice")]
    DuplicateMessageType { name: String, line: usize },
    #[error("line {line}: slot `{slot}` declared twice in `{message_type}`")]
    DuplicateSlot {
        message_type: String,
        slot: String,
        line: usize,
    },
    #[error("line {line}: unknown message type `{name}`")]
    UnknownMessageType { name: String, line: usize },
    #[error("line {line}: message type `{message_type}` has no slot `{slot}`")]
    UnknownSlot {
        message_type: String,
        slot: String,
        line: usize,
    },
    #[error("line {line}: unknown instance `{name}`")]
    UnknownInstance { name: String, line: usize },
    #[error("line {line}: instance `{instance}` is not a `{concept}` (slot `{slot}`)")]
    ConstantTypeMismatch {
        slot: String,
        instance: String,
        concept: String,
        line: usize,
    },
    #[error(
        "line {line}: ordered comparison on `{slot}` requires both slots to share a concept with a declared scale"
    )]
    ScaleRequired { slot: String, line: usize },
    #[error("line {line}: relation `{name}`: {reason}")]
    InvalidRelation { name: String, line: usize, reason: String },
}

impl OntologyError {
    pub fn kind(&self) -> &'static str {
        match self {
            OntologyError::Io { .. } => "Io",
            OntologyError::Syntax { .. } => "DslSyntaxError",
            OntologyError::CycleInTaxonomy(_) => "CycleInTaxonomy",
            OntologyError::UnknownConcept { .. } => "UnknownConcept",
            OntologyError::DuplicateConcept { .. } => "DuplicateConcept",
            OntologyError::DuplicateInstance { .. } => "DuplicateInstance",
            OntologyError::InvalidScale { .. } => "InvalidScale",
            OntologyError::DuplicateMessageType { .. } => "DuplicateMessageType",
            OntologyError::DuplicateSlot { .. } => "DuplicateSlot",
            OntologyError::UnknownMessageType { .. } => "UnknownMessageType",
            OntologyError::UnknownSlot { .. } => "UnknownSlot",
            OntologyError::UnknownInstance { .. } => "UnknownInstance",
            OntologyError::ConstantTypeMismatch { .. } => "ConstantTypeMismatch",
            OntologyError::ScaleRequired { .. } => "ScaleRequired",
            OntologyError::InvalidRelation { .. } => "InvalidRelation",
        }
    }
}

pub(crate) fn read_spec_file(path: &Path) -> Result<Vec<Statement>, OntologyError> {
    let text = fs::read_to_string(path).map_err(|source| OntologyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    dsl::parse(&text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceDef {
    pub concept: String,
    pub aliases: Vec<String>,
}

/// Concept forest with instances and ordered scales.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    parents: BTreeMap<String, Option<String>>,
    instances: BTreeMap<String, InstanceDef>,
    scales: BTreeMap<String, Vec<String>>,
}

impl Ontology {
    pub fn from_spec_str(text: &str) -> Result<Self, OntologyError> {
        Self::from_statements(&dsl::parse(text)?)
    }

    pub fn from_statements(statements: &[Statement]) -> Result<Self, OntologyError> {
        let mut ontology = Ontology::default();
        for st in statements {
            if let StatementKind::Concept { name, parent } = &st.kind {
                if ontology.parents.insert(name.clone(), parent.clone()).is_some() {
                    return Err(OntologyError::DuplicateConcept {
                        name: name.clone(),
                        line: st.line,
                    });
                }
            }
        }
        for st in statements {
            if let StatementKind::Concept {
                parent: Some(parent), ..
            } = &st.kind
            {
                if !ontology.parents.contains_key(parent) {
                    return Err(OntologyError::UnknownConcept {
                        name: parent.clone(),
                        line: st.line,
                    });
                }
            }
        }
        ontology.check_acyclic()?;

        for st in statements {
            if let StatementKind::Instance { name, concept, aliases } = &st.kind {
                if !ontology.parents.contains_key(concept) {
                    return Err(OntologyError::UnknownConcept {
                        name: concept.clone(),
                        line: st.line,
                    });
                }
                let def = InstanceDef {
                    concept: concept.clone(),
                    aliases: aliases.clone(),
                };
                if ontology.instances.insert(name.clone(), def).is_some() {
                    return Err(OntologyError::DuplicateInstance {
                        name: name.clone(),
                        line: st.line,
                    });
                }
            }
        }

        for st in statements {
            if let StatementKind::Scale { concept, values } = &st.kind {
                ontology.add_scale(concept, values, st.line)?;
            }
        }
        Ok(ontology)
    }

    fn add_scale(&mut self, concept: &str, values: &[String], line: usize) -> Result<(), OntologyError> {
        let invalid = |reason: String| OntologyError::InvalidScale {
            concept: concept.to_string(),
            line,
            reason,
        };
        if !self.parents.contains_key(concept) {
            return Err(OntologyError::UnknownConcept {
                name: concept.to_string(),
                line,
            });
        }
        if self.scales.contains_key(concept) {
            return Err(invalid("scale declared twice".into()));
        }
        let mut seen = HashSet::new();
        for value in values {
            if !seen.insert(value.as_str()) {
                return Err(invalid(format!("value `{value}` repeated")));
            }
            // Undeclared scale values become instances of the scale's concept.
            match self.instances.get(value) {
                Some(def) if def.concept != concept => {
                    return Err(invalid(format!("`{value}` is an instance of `{}`", def.concept)))
                }
                Some(_) => {}
                None => {
                    self.instances.insert(
                        value.clone(),
                        InstanceDef {
                            concept: concept.to_string(),
                            aliases: Vec::new(),
                        },
                    );
                }
            }
        }
        self.scales.insert(concept.to_string(), values.to_vec());
        Ok(())
    }

    fn check_acyclic(&self) -> Result<(), OntologyError> {
        for start in self.parents.keys() {
            let mut seen = HashSet::new();
            let mut current = Some(start.as_str());
            while let Some(c) = current {
                if !seen.insert(c) {
                    return Err(OntologyError::CycleInTaxonomy(start.clone()));
                }
                current = self.parents.get(c).and_then(|p| p.as_deref());
            }
        }
        Ok(())
    }

    pub fn has_concept(&self, concept: &str) -> bool {
        self.parents.contains_key(concept)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(String::as_str)
    }

    pub fn parent(&self, concept: &str) -> Option<&str> {
        self.parents.get(concept).and_then(|p| p.as_deref())
    }

    /// `(child, parent)` pairs.
    pub fn subtype_edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.parents
            .iter()
            .filter_map(|(c, p)| p.as_deref().map(|p| (c.as_str(), p)))
    }

    /// Reflexive-transitive closure of the subtype edges.
    pub fn is_subtype(&self, a: &str, b: &str) -> bool {
        if !self.has_concept(a) || !self.has_concept(b) {
            return false;
        }
        let mut current = Some(a);
        while let Some(c) = current {
            if c == b {
                return true;
            }
            current = self.parent(c);
        }
        false
    }

    pub fn instance(&self, name: &str) -> Option<&InstanceDef> {
        self.instances.get(name)
    }

    pub fn instances(&self) -> impl Iterator<Item = (&str, &InstanceDef)> {
        self.instances.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn instance_of(&self, instance: &str, concept: &str) -> bool {
        self.instances
            .get(instance)
            .is_some_and(|def| self.is_subtype(&def.concept, concept))
    }

    pub fn scale(&self, concept: &str) -> Option<&[String]> {
        self.scales.get(concept).map(Vec::as_slice)
    }

    pub fn scales(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.scales.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn scale_position(&self, concept: &str, value: &str) -> Option<usize> {
        self.scales.get(concept)?.iter().position(|v| v == value)
    }

    /// Spec-file text that reloads to an equal ontology.
    pub fn to_spec_string(&self) -> String {
        let mut out = String::new();
        // parents first so the output reads top-down
        let mut emitted = HashSet::new();
        let mut pending: Vec<&String> = self.parents.keys().collect();
        while !pending.is_empty() {
            pending.retain(|c| {
                let ready = self.parent(c).is_none_or(|p| emitted.contains(p));
                if ready {
                    match self.parent(c) {
                        Some(p) => writeln!(out, "concept {} < {}", dsl::quote_name(c), dsl::quote_name(p)).unwrap(),
                        None => writeln!(out, "concept {}", dsl::quote_name(c)).unwrap(),
                    }
                    emitted.insert(c.as_str());
                }
                !ready
            });
        }
        let scale_values: HashSet<&str> = self.scales.values().flatten().map(String::as_str).collect();
        for (name, def) in &self.instances {
            if scale_values.contains(name.as_str()) && def.aliases.is_empty() {
                continue;
            }
            write!(
                out,
                "instance {} : {}",
                dsl::quote_name(name),
                dsl::quote_name(&def.concept)
            )
            .unwrap();
            if !def.aliases.is_empty() {
                let aliases: Vec<String> = def.aliases.iter().map(|a| dsl::quote_string(a)).collect();
                write!(out, " aka {}", aliases.join(", ")).unwrap();
            }
            out.push('\n');
        }
        for (concept, values) in &self.scales {
            let values: Vec<String> = values.iter().map(|v| dsl::quote_name(v)).collect();
            writeln!(out, "scale {} = {}", dsl::quote_name(concept), values.join(" < ")).unwrap();
        }
        out
    }
}

pub fn load_ontology(path: &Path) -> Result<Ontology, OntologyError> {
    Ontology::from_statements(&read_spec_file(path)?)
}

/// Slot fills: slot name → instance name, `None` for unfilled slots.
pub type Args = BTreeMap<String, Option<String>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRef {
    pub side: SideTag,
    pub slot: String,
}

/// Serializable mirror of [`Side`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideTag {
    Left,
    Right,
}

impl From<Side> for SideTag {
    fn from(s: Side) -> Self {
        match s {
            Side::Left => SideTag::Left,
            Side::Right => SideTag::Right,
        }
    }
}

impl SlotRef {
    pub fn left(slot: &str) -> Self {
        SlotRef {
            side: SideTag::Left,
            slot: slot.to_string(),
        }
    }

    pub fn right(slot: &str) -> Self {
        SlotRef {
            side: SideTag::Right,
            slot: slot.to_string(),
        }
    }

    fn value<'a>(&self, left: &'a Args, right: &'a Args) -> Option<&'a str> {
        let args = match self.side {
            SideTag::Left => left,
            SideTag::Right => right,
        };
        args.get(&self.slot).and_then(|v| v.as_deref())
    }

    fn render(&self, sided: bool) -> String {
        match (sided, self.side) {
            (false, _) => self.slot.clone(),
            (true, SideTag::Left) => format!("left.{}", self.slot),
            (true, SideTag::Right) => format!("right.{}", self.slot),
        }
    }
}

/// One conjunct of a relation rule or message constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionAtom {
    SlotEq {
        left: SlotRef,
        right: SlotRef,
    },
    SlotNeq {
        left: SlotRef,
        right: SlotRef,
    },
    /// Ordered comparison along the scale of `scale`.
    SlotLt {
        left: SlotRef,
        right: SlotRef,
        scale: String,
    },
    SlotGt {
        left: SlotRef,
        right: SlotRef,
        scale: String,
    },
    SlotConst {
        slot: SlotRef,
        value: String,
    },
}

impl ConditionAtom {
    /// Three-valued evaluation: `None` when an operand slot is unfilled.
    pub fn eval(&self, left: &Args, right: &Args, ontology: &Ontology) -> Option<bool> {
        match self {
            ConditionAtom::SlotEq { left: a, right: b } => Some(a.value(left, right)? == b.value(left, right)?),
            ConditionAtom::SlotNeq { left: a, right: b } => Some(a.value(left, right)? != b.value(left, right)?),
            ConditionAtom::SlotLt {
                left: a,
                right: b,
                scale,
            }
            | ConditionAtom::SlotGt {
                left: a,
                right: b,
                scale,
            } => {
                let x = a.value(left, right)?;
                let y = b.value(left, right)?;
                let (px, py) = match (ontology.scale_position(scale, x), ontology.scale_position(scale, y)) {
                    (Some(px), Some(py)) => (px, py),
                    _ => return Some(false),
                };
                Some(if matches!(self, ConditionAtom::SlotLt { .. }) {
                    px < py
                } else {
                    px > py
                })
            }
            ConditionAtom::SlotConst { slot, value } => Some(slot.value(left, right)? == value),
        }
    }

    pub fn slot_refs(&self) -> Vec<&SlotRef> {
        match self {
            ConditionAtom::SlotEq { left, right }
            | ConditionAtom::SlotNeq { left, right }
            | ConditionAtom::SlotLt { left, right, .. }
            | ConditionAtom::SlotGt { left, right, .. } => vec![left, right],
            ConditionAtom::SlotConst { slot, .. } => vec![slot],
        }
    }

    fn render(&self, sided: bool) -> String {
        match self {
            ConditionAtom::SlotEq { left, right } => format!("{} == {}", left.render(sided), right.render(sided)),
            ConditionAtom::SlotNeq { left, right } => format!("{} != {}", left.render(sided), right.render(sided)),
            ConditionAtom::SlotLt { left, right, .. } => format!("{} < {}", left.render(sided), right.render(sided)),
            ConditionAtom::SlotGt { left, right, .. } => format!("{} > {}", left.render(sided), right.render(sided)),
            ConditionAtom::SlotConst { slot, value } => {
                format!("{} == {}", slot.render(sided), dsl::quote_string(value))
            }
        }
    }
}

impl fmt::Display for ConditionAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(true))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub concept: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageTypeSpec {
    pub name: String,
    pub slots: Vec<SlotSpec>,
    /// Cross-slot constraints; both sides refer to the same message.
    pub constraints: Vec<ConditionAtom>,
}

impl MessageTypeSpec {
    pub fn slot(&self, name: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.name == name)
    }

    /// Constraint check with unfilled operands treated as satisfied.
    pub fn constraints_hold(&self, args: &Args, ontology: &Ontology) -> Result<(), &ConditionAtom> {
        match self
            .constraints
            .iter()
            .find(|c| c.eval(args, args, ontology) == Some(false))
        {
            Some(c) => Err(c),
            None => Ok(()),
        }
    }

    pub fn to_spec_line(&self) -> String {
        let slots: Vec<String> = self
            .slots
            .iter()
            .map(|s| format!("{}:{}", s.name, dsl::quote_name(&s.concept)))
            .collect();
        let mut line = format!("message {}({})", dsl::quote_name(&self.name), slots.join(", "));
        if !self.constraints.is_empty() {
            let atoms: Vec<String> = self.constraints.iter().map(|c| c.render(false)).collect();
            write!(line, " where {}", atoms.join(" && ")).unwrap();
        }
        line
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Synchronic,
    Diachronic,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Synchronic => "synchronic",
            Axis::Diachronic => "diachronic",
        })
    }
}

/// Constraint on the report-step distance of a diachronic pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceConstraint {
    Exactly(i64),
    AtLeast(i64),
}

impl DistanceConstraint {
    pub fn admits(&self, distance: i64) -> bool {
        match *self {
            DistanceConstraint::Exactly(k) => distance == k,
            DistanceConstraint::AtLeast(k) => distance >= k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub name: String,
    pub axis: Axis,
    pub left_type: String,
    pub right_type: String,
    pub conditions: Vec<ConditionAtom>,
    pub distance: Option<DistanceConstraint>,
    pub symmetric: bool,
}

impl RelationSpec {
    pub fn conditions_hold(&self, left: &Args, right: &Args, ontology: &Ontology) -> bool {
        self.conditions
            .iter()
            .all(|c| c.eval(left, right, ontology) == Some(true))
    }

    pub fn to_spec_line(&self) -> String {
        let mut line = format!(
            "relation {} axis={} left={} right={}",
            dsl::quote_name(&self.name),
            self.axis,
            dsl::quote_name(&self.left_type),
            dsl::quote_name(&self.right_type)
        );
        match self.distance {
            Some(DistanceConstraint::Exactly(k)) => write!(line, " distance=={k}").unwrap(),
            Some(DistanceConstraint::AtLeast(k)) => write!(line, " distance>={k}").unwrap(),
            None => {}
        }
        if self.symmetric {
            line.push_str(" symmetric");
        }
        if !self.conditions.is_empty() {
            let atoms: Vec<String> = self.conditions.iter().map(|c| c.render(true)).collect();
            write!(line, " where {}", atoms.join(" && ")).unwrap();
        }
        line
    }
}

pub fn load_message_specs(path: &Path, ontology: &Ontology) -> Result<Vec<MessageTypeSpec>, OntologyError> {
    message_specs_from_statements(&read_spec_file(path)?, ontology)
}

pub fn message_specs_from_statements(
    statements: &[Statement],
    ontology: &Ontology,
) -> Result<Vec<MessageTypeSpec>, OntologyError> {
    let mut specs: Vec<MessageTypeSpec> = Vec::new();
    for st in statements {
        let StatementKind::Message {
            name,
            slots,
            constraints,
        } = &st.kind
        else {
            continue;
        };
        if specs.iter().any(|s| &s.name == name) {
            return Err(OntologyError::DuplicateMessageType {
                name: name.clone(),
                line: st.line,
            });
        }
        let mut slot_specs: Vec<SlotSpec> = Vec::new();
        for (slot, concept) in slots {
            if slot_specs.iter().any(|s| &s.name == slot) {
                return Err(OntologyError::DuplicateSlot {
                    message_type: name.clone(),
                    slot: slot.clone(),
                    line: st.line,
                });
            }
            if !ontology.has_concept(concept) {
                return Err(OntologyError::UnknownConcept {
                    name: concept.clone(),
                    line: st.line,
                });
            }
            slot_specs.push(SlotSpec {
                name: slot.clone(),
                concept: concept.clone(),
            });
        }
        let spec = MessageTypeSpec {
            name: name.clone(),
            slots: slot_specs,
            constraints: Vec::new(),
        };
        let constraints = constraints
            .iter()
            .map(|atom| resolve_atom(atom, &spec, &spec, ontology, st.line))
            .collect::<Result<Vec<_>, _>>()?;
        specs.push(MessageTypeSpec { constraints, ..spec });
    }
    Ok(specs)
}

pub fn load_relation_specs(
    path: &Path,
    ontology: &Ontology,
    message_specs: &[MessageTypeSpec],
) -> Result<Vec<RelationSpec>, OntologyError> {
    relation_specs_from_statements(&read_spec_file(path)?, ontology, message_specs)
}

pub fn relation_specs_from_statements(
    statements: &[Statement],
    ontology: &Ontology,
    message_specs: &[MessageTypeSpec],
) -> Result<Vec<RelationSpec>, OntologyError> {
    let find = |name: &str, line: usize| {
        message_specs
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| OntologyError::UnknownMessageType {
                name: name.to_string(),
                line,
            })
    };
    let mut specs = Vec::new();
    for st in statements {
        let StatementKind::Relation {
            name,
            axis,
            left,
            right,
            distance,
            symmetric,
            conditions,
        } = &st.kind
        else {
            continue;
        };
        let invalid = |reason: &str| OntologyError::InvalidRelation {
            name: name.clone(),
            line: st.line,
            reason: reason.to_string(),
        };
        let axis = match axis.as_str() {
            "synchronic" => Axis::Synchronic,
            "diachronic" => Axis::Diachronic,
            other => return Err(invalid(&format!("unknown axis `{other}`"))),
        };
        let distance = distance.as_ref().map(|d| match *d {
            DistanceAst::Exactly(k) => DistanceConstraint::Exactly(k),
            DistanceAst::AtLeast(k) => DistanceConstraint::AtLeast(k),
        });
        if axis == Axis::Synchronic && distance.is_some() {
            return Err(invalid("distance constraints apply only to diachronic relations"));
        }
        if axis == Axis::Diachronic && *symmetric {
            return Err(invalid("diachronic relations cannot be symmetric"));
        }
        let left_spec = find(left, st.line)?;
        let right_spec = find(right, st.line)?;
        let conditions = conditions
            .iter()
            .map(|atom| resolve_atom(atom, left_spec, right_spec, ontology, st.line))
            .collect::<Result<Vec<_>, _>>()?;
        specs.push(RelationSpec {
            name: name.clone(),
            axis,
            left_type: left.clone(),
            right_type: right.clone(),
            conditions,
            distance,
            symmetric: *symmetric,
        });
    }
    Ok(specs)
}

fn resolve_atom(
    atom: &AtomAst,
    left: &MessageTypeSpec,
    right: &MessageTypeSpec,
    ontology: &Ontology,
    line: usize,
) -> Result<ConditionAtom, OntologyError> {
    let resolve_ref = |r: &dsl::RefAst| -> Result<(SlotRef, &SlotSpec), OntologyError> {
        let side = r.side.unwrap_or(Side::Left);
        let spec = match side {
            Side::Left => left,
            Side::Right => right,
        };
        let slot = spec.slot(&r.slot).ok_or_else(|| OntologyError::UnknownSlot {
            message_type: spec.name.clone(),
            slot: r.slot.clone(),
            line,
        })?;
        Ok((
            SlotRef {
                side: side.into(),
                slot: r.slot.clone(),
            },
            slot,
        ))
    };
    let (lhs, lhs_slot) = resolve_ref(&atom.lhs)?;
    match &atom.rhs {
        RhsAst::Const(value) => {
            let def = ontology.instance(value).ok_or_else(|| OntologyError::UnknownInstance {
                name: value.clone(),
                line,
            })?;
            if !ontology.is_subtype(&def.concept, &lhs_slot.concept) {
                return Err(OntologyError::ConstantTypeMismatch {
                    slot: lhs_slot.name.clone(),
                    instance: value.clone(),
                    concept: lhs_slot.concept.clone(),
                    line,
                });
            }
            Ok(ConditionAtom::SlotConst {
                slot: lhs,
                value: value.clone(),
            })
        }
        RhsAst::Ref(r) => {
            let (rhs, rhs_slot) = resolve_ref(r)?;
            match atom.op {
                "==" => Ok(ConditionAtom::SlotEq { left: lhs, right: rhs }),
                "!=" => Ok(ConditionAtom::SlotNeq { left: lhs, right: rhs }),
                op => {
                    let concept = &lhs_slot.concept;
                    if ontology.scale(concept).is_none() || rhs_slot.concept != *concept {
                        let culprit = if ontology.scale(concept).is_none() {
                            &lhs_slot.name
                        } else {
                            &rhs_slot.name
                        };
                        return Err(OntologyError::ScaleRequired {
                            slot: culprit.clone(),
                            line,
                        });
                    }
                    let scale = concept.clone();
                    Ok(if op == "<" {
                        ConditionAtom::SlotLt {
                            left: lhs,
                            right: rhs,
                            scale,
                        }
                    } else {
                        ConditionAtom::SlotGt {
                            left: lhs,
                            right: rhs,
                            scale,
                        }
                    })
                }
            }
        }
    }
}

/// A fully loaded domain: ontology, message types, relation rules and
/// trigger rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSpec {
    pub ontology: Ontology,
    pub messages: Vec<MessageTypeSpec>,
    pub relations: Vec<RelationSpec>,
    pub triggers: Vec<crate::extract::TriggerRule>,
}

impl DomainSpec {
    pub fn from_spec_str(text: &str) -> Result<Self, OntologyError> {
        Self::from_statements(&dsl::parse(text)?, &[])
    }

    /// Ontology statements may live in a separate file (or the same one).
    pub fn load(ontology_path: &Path, specs_path: &Path) -> Result<Self, OntologyError> {
        let ontology_statements = read_spec_file(ontology_path)?;
        if ontology_path == specs_path {
            return Self::from_statements(&ontology_statements, &[]);
        }
        let spec_statements = read_spec_file(specs_path)?;
        Self::from_statements(&ontology_statements, &spec_statements)
    }

    fn from_statements(first: &[Statement], second: &[Statement]) -> Result<Self, OntologyError> {
        let mut all: Vec<Statement> = first.to_vec();
        all.extend_from_slice(second);
        let ontology = Ontology::from_statements(&all)?;
        let messages = message_specs_from_statements(&all, &ontology)?;
        let relations = relation_specs_from_statements(&all, &ontology, &messages)?;
        let triggers = crate::extract::trigger_rules_from_statements(&all, &messages)?;
        Ok(DomainSpec {
            ontology,
            messages,
            relations,
            triggers,
        })
    }

    pub fn message_spec(&self, name: &str) -> Option<&MessageTypeSpec> {
        self.messages.iter().find(|m| m.name == name)
    }

    pub fn type_order(&self) -> Vec<String> {
        self.messages.iter().map(|m| m.name.clone()).collect()
    }

    pub fn relation_names(&self) -> BTreeSet<&str> {
        self.relations.iter().map(|r| r.name.as_str()).collect()
    }

    /// Serializes every statement; reloading the text yields an equal domain.
    pub fn to_spec_string(&self) -> String {
        let mut out = self.ontology.to_spec_string();
        for m in &self.messages {
            out.push_str(&m.to_spec_line());
            out.push('\n');
        }
        for r in &self.relations {
            out.push_str(&r.to_spec_line());
            out.push('\n');
        }
        for t in &self.triggers {
            out.push_str(&t.to_spec_line());
            out.push('\n');
        }
        out
    }

    /// Message types by name, for quick lookups.
    pub fn message_index(&self) -> HashMap<&str, &MessageTypeSpec> {
        self.messages.iter().map(|m| (m.name.as_str(), m)).collect()
    }
}

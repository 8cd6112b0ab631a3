//! Template-based rendering of the relation graph.
//!
//! The summary walks time buckets in order. Within a bucket it states each
//! synchronic component once, crediting every source involved, then the
//! diachronic chains that end there, then messages left unconnected. A
//! coverage trace records which relation instances fed which sentence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{Message, MessageRef};
use crate::ontology::{Axis, DomainSpec};
use crate::relations::{self, Bucket, EllipsisReport, RelationInstance, WindowPolicy};

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("template `{0}` declared twice")]
    DuplicateTemplate(String),
    #[error("template `{template}` uses unknown placeholder `{{{placeholder}}}`")]
    UnknownPlaceholder { template: String, placeholder: String },
    #[error("no template for `{0}`")]
    MissingTemplate(String),
    #[error("relation {relation} refers to message {message} which is not in the graph")]
    DanglingEdge { relation: String, message: MessageRef },
}

impl SummaryError {
    pub fn kind(&self) -> &'static str {
        match self {
            SummaryError::Io { .. } => "Io",
            SummaryError::Syntax { .. } => "TemplateSyntaxError",
            SummaryError::DuplicateTemplate(_) => "DuplicateTemplate",
            SummaryError::UnknownPlaceholder { .. } => "UnknownPlaceholder",
            SummaryError::MissingTemplate(_) => "MissingTemplate",
            SummaryError::DanglingEdge { .. } => "DanglingEdge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Hole(String),
}

/// A parsed pattern: literal text and `{placeholder}` holes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pieces: Vec<Piece>,
}

impl Pattern {
    pub fn parse(raw: &str) -> Result<Self, String> {
        let mut pieces = Vec::new();
        let mut text = String::new();
        let mut chars = raw.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    text.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    text.push('}');
                }
                '{' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(c) if c.is_alphanumeric() || c == '_' || c == '.' || c == '-' => name.push(c),
                            _ => return Err(format!("unterminated or malformed placeholder `{{{name}`")),
                        }
                    }
                    if name.is_empty() {
                        return Err("empty placeholder `{}`".into());
                    }
                    if !text.is_empty() {
                        pieces.push(Piece::Text(std::mem::take(&mut text)));
                    }
                    pieces.push(Piece::Hole(name));
                }
                '}' => return Err("stray `}` (write `}}` for a literal brace)".into()),
                c => text.push(c),
            }
        }
        if !text.is_empty() {
            pieces.push(Piece::Text(text));
        }
        Ok(Pattern { pieces })
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Hole(h) => Some(h.as_str()),
            Piece::Text(_) => None,
        })
    }

    fn render(&self, lookup: impl Fn(&str) -> String) -> String {
        let mut out = String::new();
        for p in &self.pieces {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Hole(h) => out.push_str(&lookup(h)),
            }
        }
        out
    }
}

/// Relation templates plus per-type `message` and `ellipsis` templates.
/// A relation template may be narrowed to one left message type, which
/// matters when several rules share a name across types.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateSet {
    pub relations: BTreeMap<String, Pattern>,
    pub typed_relations: BTreeMap<(String, String), Pattern>,
    pub messages: BTreeMap<String, Pattern>,
    pub ellipsis: BTreeMap<String, Pattern>,
}

fn unquote(raw: &str) -> Option<String> {
    let inner = raw.strip_prefix('"')?.strip_suffix('"')?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next()? {
                'n' => out.push('\n'),
                c @ ('"' | '\\') => out.push(c),
                _ => return None,
            },
            '"' => return None,
            c => out.push(c),
        }
    }
    Some(out)
}

impl TemplateSet {
    /// One template per line:
    ///
    /// ```text
    /// template agreement: "{sources} report that {left.entity} played {left.value}."
    /// template agreement negotiate: "{sources} report talks between {left.entity_1} and {left.entity_2}."
    /// template message performance: "{entity} played {value}."
    /// template ellipsis performance: "Only {source} reported that {entity} played {value}."
    /// ```
    pub fn parse(text: &str) -> Result<Self, SummaryError> {
        let mut set = TemplateSet::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |reason: &str| SummaryError::Syntax {
                line: n + 1,
                reason: reason.to_string(),
            };
            let rest = line
                .strip_prefix("template")
                .filter(|r| r.starts_with(char::is_whitespace))
                .ok_or_else(|| syntax("expected `template <name>: \"<pattern>\"`"))?;
            let (head, body) = rest
                .split_once(':')
                .ok_or_else(|| syntax("missing `:` after template name"))?;
            let words: Vec<&str> = head.split_whitespace().collect();
            let body = unquote(body.trim()).ok_or_else(|| syntax("pattern must be a double-quoted string"))?;
            let pattern = Pattern::parse(&body).map_err(|e| syntax(&e))?;
            let (previous, display) = match words.as_slice() {
                [name] => (set.relations.insert(name.to_string(), pattern), name.to_string()),
                ["message", ty] => (set.messages.insert(ty.to_string(), pattern), format!("message {ty}")),
                ["ellipsis", ty] => (set.ellipsis.insert(ty.to_string(), pattern), format!("ellipsis {ty}")),
                [name, ty] => (
                    set.typed_relations.insert((name.to_string(), ty.to_string()), pattern),
                    format!("{name} {ty}"),
                ),
                _ => return Err(syntax(
                    "template name must be `<relation>`, `<relation> <type>`, `message <type>` or `ellipsis <type>`",
                )),
            };
            if previous.is_some() {
                return Err(SummaryError::DuplicateTemplate(display));
            }
        }
        Ok(set)
    }

    /// The template for a relation with the given left message type.
    pub fn relation(&self, name: &str, left_type: &str) -> Option<&Pattern> {
        self.typed_relations
            .get(&(name.to_string(), left_type.to_string()))
            .or_else(|| self.relations.get(name))
    }

    pub fn load(path: &Path) -> Result<Self, SummaryError> {
        let text = fs::read_to_string(path).map_err(|source| SummaryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Checks every placeholder against the slots of the message types it
    /// can be instantiated with.
    pub fn validate(&self, domain: &DomainSpec) -> Result<(), SummaryError> {
        let unknown = |template: String, placeholder: &str| SummaryError::UnknownPlaceholder {
            template,
            placeholder: placeholder.to_string(),
        };
        const COMMON: [&str; 6] = [
            "sources",
            "date",
            "left.source",
            "right.source",
            "left.date",
            "right.date",
        ];
        let relation_templates = self
            .relations
            .iter()
            .map(|(name, p)| (name, None, p, name.clone()))
            .chain(
                self.typed_relations
                    .iter()
                    .map(|((name, ty), p)| (name, Some(ty), p, format!("{name} {ty}"))),
            );
        for (name, ty, pattern, display) in relation_templates {
            let specs: Vec<_> = domain
                .relations
                .iter()
                .filter(|r| &r.name == name)
                .filter(|r| match ty {
                    Some(ty) => &r.left_type == ty,
                    None => !self.typed_relations.contains_key(&(name.clone(), r.left_type.clone())),
                })
                .collect();
            for hole in pattern.placeholders() {
                if COMMON.contains(&hole) {
                    continue;
                }
                let ok = match hole.split_once('.') {
                    Some(("left", slot)) => specs.iter().all(|r| {
                        domain
                            .message_spec(&r.left_type)
                            .is_some_and(|m| m.slot(slot).is_some())
                    }),
                    Some(("right", slot)) => specs.iter().all(|r| {
                        domain
                            .message_spec(&r.right_type)
                            .is_some_and(|m| m.slot(slot).is_some())
                    }),
                    _ => false,
                };
                if !ok {
                    return Err(unknown(display.clone(), hole));
                }
            }
        }
        for (kind, table) in [("message", &self.messages), ("ellipsis", &self.ellipsis)] {
            for (ty, pattern) in table {
                let spec = domain.message_spec(ty);
                for hole in pattern.placeholders() {
                    let ok =
                        matches!(hole, "source" | "sources" | "date") || spec.is_some_and(|m| m.slot(hole).is_some());
                    if !ok {
                        return Err(unknown(format!("{kind} {ty}"), hole));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Messages, relation instances, time buckets and ellipsis reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationGraph {
    pub nodes: Vec<Message>,
    pub edges: Vec<RelationInstance>,
    pub buckets: Vec<Bucket>,
    pub ellipsis: Vec<EllipsisReport>,
}

/// Nodes sorted by anchor, edges in canonical relation order. `sources`
/// lists every source of the corpus, including ones with no messages.
pub fn build_graph(
    messages: &[Message],
    relations: &[RelationInstance],
    window: &WindowPolicy,
    sources: &BTreeSet<String>,
) -> Result<RelationGraph, SummaryError> {
    let known: BTreeSet<MessageRef> = messages.iter().map(Message::key).collect();
    for r in relations {
        for end in [&r.left, &r.right] {
            if !known.contains(end) {
                return Err(SummaryError::DanglingEdge {
                    relation: r.name.clone(),
                    message: end.clone(),
                });
            }
        }
    }
    let mut nodes = messages.to_vec();
    nodes.sort_by(|a, b| {
        (a.time.first_minute(), a.time.last_minute(), a.key()).cmp(&(
            b.time.first_minute(),
            b.time.last_minute(),
            b.key(),
        ))
    });
    let unique: BTreeSet<RelationInstance> = relations.iter().cloned().collect();
    let edges = relations::sort_instances(unique.into_iter().collect(), messages);
    let ellipsis = if sources.len() >= 2 {
        relations::detect_ellipsis(messages, sources, window)
    } else {
        Vec::new()
    };
    Ok(RelationGraph {
        nodes,
        edges,
        buckets: relations::bucketize(messages, window),
        ellipsis,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Most unconnected-message sentences per bucket; relation statements
    /// are never dropped.
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatementKind {
    Synchronic,
    Diachronic,
    Message,
    Ellipsis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStatement {
    pub bucket: usize,
    pub kind: StatementKind,
    pub relation: Option<String>,
    /// Indices into the graph's edge list.
    pub edges: Vec<usize>,
    pub messages: Vec<MessageRef>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeUse {
    pub edge: usize,
    pub name: String,
    pub axis: Axis,
    pub left: MessageRef,
    pub right: MessageRef,
    pub uses: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageTrace {
    pub statements: Vec<TraceStatement>,
    pub edges: Vec<EdgeUse>,
    /// Messages left out by the per-bucket budget.
    pub dropped: Vec<MessageRef>,
}

impl CoverageTrace {
    pub fn each_edge_used_once(&self) -> bool {
        self.edges.iter().all(|e| e.uses == 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub text: String,
    pub trace: CoverageTrace,
}

/// "A", "A and B", "A, B and C".
pub fn join_sources<S: AsRef<str>>(sources: &[S]) -> String {
    match sources {
        [] => String::new(),
        [one] => one.as_ref().to_string(),
        [init @ .., last] => {
            let init: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{} and {}", init.join(", "), last.as_ref())
        }
    }
}

fn arg_text(m: &Message, slot: &str) -> String {
    match m.args.get(slot) {
        Some(Some(v)) => v.clone(),
        _ => "unknown".to_string(),
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

struct Renderer<'a> {
    templates: &'a TemplateSet,
}

impl Renderer<'_> {
    fn message_sentence(&self, m: &Message, sources: &str) -> Result<String, SummaryError> {
        let pattern = self
            .templates
            .messages
            .get(&m.msg_type)
            .ok_or_else(|| SummaryError::MissingTemplate(format!("message {}", m.msg_type)))?;
        Ok(pattern.render(|hole| match hole {
            "source" | "sources" => sources.to_string(),
            "date" => m.time.date().to_string(),
            slot => arg_text(m, slot),
        }))
    }

    fn ellipsis_sentence(&self, m: &Message, source: &str) -> Result<String, SummaryError> {
        match self.templates.ellipsis.get(&m.msg_type) {
            Some(pattern) => Ok(pattern.render(|hole| match hole {
                "source" | "sources" => source.to_string(),
                "date" => m.time.date().to_string(),
                slot => arg_text(m, slot),
            })),
            None => Ok(format!("Only {source} reported: {}", self.message_sentence(m, source)?)),
        }
    }

    fn relation_sentence(&self, name: &str, left: &Message, right: &Message, sources: &str, date: &str) -> String {
        let pattern = self
            .templates
            .relation(name, &left.msg_type)
            .expect("templates checked before rendering");
        pattern.render(|hole| match hole {
            "sources" => sources.to_string(),
            "date" => date.to_string(),
            "left.source" => left.source.clone(),
            "right.source" => right.source.clone(),
            "left.date" => left.time.date().to_string(),
            "right.date" => right.time.date().to_string(),
            other => match other.split_once('.') {
                Some(("left", slot)) => arg_text(left, slot),
                Some(("right", slot)) => arg_text(right, slot),
                _ => format!("{{{other}}}"),
            },
        })
    }
}

/// Renders the graph bucket by bucket. Fails with `MissingTemplate` before
/// producing any text if a needed template is absent.
pub fn render_summary(
    graph: &RelationGraph,
    templates: &TemplateSet,
    options: &RenderOptions,
) -> Result<Summary, SummaryError> {
    let index: HashMap<MessageRef, usize> = graph.nodes.iter().enumerate().map(|(i, m)| (m.key(), i)).collect();
    let node = |r: &MessageRef| index[r];
    let mut bucket_of = vec![0usize; graph.nodes.len()];
    for b in &graph.buckets {
        for m in &b.members {
            bucket_of[node(m)] = b.index;
        }
    }
    let names: BTreeSet<&str> = graph.edges.iter().map(|e| e.name.as_str()).collect();
    let needed: BTreeSet<(&str, &str)> = graph
        .edges
        .iter()
        .map(|e| (e.name.as_str(), graph.nodes[node(&e.left)].msg_type.as_str()))
        .collect();
    if let Some((missing, _)) = needed.iter().find(|(n, ty)| templates.relation(n, ty).is_none()) {
        return Err(SummaryError::MissingTemplate(missing.to_string()));
    }
    let renderer = Renderer { templates };

    let mut connected = vec![false; graph.nodes.len()];
    for e in &graph.edges {
        connected[node(&e.left)] = true;
        connected[node(&e.right)] = true;
    }

    // (bucket, kind order, first edge) → statement
    let mut planned: BTreeMap<(usize, u8, usize), TraceStatement> = BTreeMap::new();

    for name in &names {
        let sync: Vec<usize> = (0..graph.edges.len())
            .filter(|&i| graph.edges[i].name == *name && graph.edges[i].axis == Axis::Synchronic)
            .collect();
        let mut uf = UnionFind::new(graph.nodes.len());
        for &i in &sync {
            uf.union(node(&graph.edges[i].left), node(&graph.edges[i].right));
        }
        let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &i in &sync {
            let root = uf.find(node(&graph.edges[i].left));
            components.entry(root).or_default().push(i);
        }
        for edges in components.into_values() {
            let first = &graph.edges[edges[0]];
            let (l, r) = (&graph.nodes[node(&first.left)], &graph.nodes[node(&first.right)]);
            let members: BTreeSet<usize> = edges
                .iter()
                .flat_map(|&i| [node(&graph.edges[i].left), node(&graph.edges[i].right)])
                .collect();
            let sources: BTreeSet<&str> = members.iter().map(|&n| graph.nodes[n].source.as_str()).collect();
            let sources: Vec<&str> = sources.into_iter().collect();
            let mut text = renderer.relation_sentence(name, l, r, &join_sources(&sources), &l.time.date().to_string());
            let stated = [(&l.msg_type, &l.args), (&r.msg_type, &r.args)];
            // (type, arguments) -> (first node, reporting sources)
            type Variants<'a> = BTreeMap<(&'a String, Vec<Option<&'a str>>), (usize, BTreeSet<&'a str>)>;
            let mut variants: Variants = BTreeMap::new();
            for &n in &members {
                let m = &graph.nodes[n];
                if stated.contains(&(&m.msg_type, &m.args)) {
                    continue;
                }
                let entry = variants
                    .entry((&m.msg_type, m.arg_tuple()))
                    .or_insert((n, BTreeSet::new()));
                entry.1.insert(m.source.as_str());
            }
            for (n, vs) in variants.into_values() {
                let vs: Vec<&str> = vs.into_iter().collect();
                text.push(' ');
                text.push_str(&renderer.message_sentence(&graph.nodes[n], &join_sources(&vs))?);
            }
            planned.insert(
                (bucket_of[node(&first.left)], 0, edges[0]),
                TraceStatement {
                    bucket: bucket_of[node(&first.left)],
                    kind: StatementKind::Synchronic,
                    relation: Some(name.to_string()),
                    messages: members.iter().map(|&n| graph.nodes[n].key()).collect(),
                    edges,
                    text,
                },
            );
        }

        let dia: Vec<usize> = (0..graph.edges.len())
            .filter(|&i| graph.edges[i].name == *name && graph.edges[i].axis == Axis::Diachronic)
            .collect();
        let mut indeg = vec![0usize; graph.nodes.len()];
        let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); graph.nodes.len()];
        for &i in &dia {
            indeg[node(&graph.edges[i].right)] += 1;
            out_edges[node(&graph.edges[i].left)].push(i);
        }
        let internal = |n: usize| indeg[n] == 1 && out_edges[n].len() == 1;
        let mut used: BTreeSet<usize> = BTreeSet::new();
        let starts: Vec<usize> = dia
            .iter()
            .copied()
            .filter(|&i| !internal(node(&graph.edges[i].left)))
            .chain(dia.iter().copied())
            .collect();
        for start in starts {
            if used.contains(&start) {
                continue;
            }
            let mut chain = vec![start];
            used.insert(start);
            let mut cur = node(&graph.edges[start].right);
            while internal(cur) && !used.contains(&out_edges[cur][0]) {
                let next = out_edges[cur][0];
                used.insert(next);
                chain.push(next);
                cur = node(&graph.edges[next].right);
            }
            let l = &graph.nodes[node(&graph.edges[chain[0]].left)];
            let r = &graph.nodes[cur];
            let mut members: Vec<MessageRef> = vec![l.key()];
            members.extend(chain.iter().map(|&i| graph.edges[i].right.clone()));
            let text = renderer.relation_sentence(name, l, r, &l.source, &r.time.date().to_string());
            planned.insert(
                (bucket_of[cur], 1, chain[0]),
                TraceStatement {
                    bucket: bucket_of[cur],
                    kind: StatementKind::Diachronic,
                    relation: Some(name.to_string()),
                    edges: chain,
                    messages: members,
                    text,
                },
            );
        }
    }

    let uncovered: BTreeSet<&MessageRef> = graph
        .ellipsis
        .iter()
        .filter(|e| e.uncovered)
        .map(|e| &e.message)
        .collect();
    let mut dropped = Vec::new();
    for bucket in &graph.buckets {
        // identical lone messages collapse into one sentence
        let mut groups: BTreeMap<(&String, Vec<Option<&str>>), Vec<usize>> = BTreeMap::new();
        let mut order: Vec<(&String, Vec<Option<&str>>)> = Vec::new();
        for key in &bucket.members {
            let n = node(key);
            if connected[n] {
                continue;
            }
            let m = &graph.nodes[n];
            let group_key = (&m.msg_type, m.arg_tuple());
            if !groups.contains_key(&group_key) {
                order.push(group_key.clone());
            }
            groups.entry(group_key).or_default().push(n);
        }
        for (k, group_key) in order.into_iter().enumerate() {
            let members = &groups[&group_key];
            let keys: Vec<MessageRef> = members.iter().map(|&n| graph.nodes[n].key()).collect();
            if options.budget.is_some_and(|b| k >= b) {
                dropped.extend(keys);
                continue;
            }
            let first = &graph.nodes[members[0]];
            let sources: BTreeSet<&str> = members.iter().map(|&n| graph.nodes[n].source.as_str()).collect();
            let sources: Vec<&str> = sources.into_iter().collect();
            let alone = keys.iter().all(|k| uncovered.contains(k));
            let (kind, text) = if alone {
                (
                    StatementKind::Ellipsis,
                    renderer.ellipsis_sentence(first, &join_sources(&sources))?,
                )
            } else {
                (
                    StatementKind::Message,
                    renderer.message_sentence(first, &join_sources(&sources))?,
                )
            };
            planned.insert(
                (bucket.index, 2, k),
                TraceStatement {
                    bucket: bucket.index,
                    kind,
                    relation: None,
                    edges: Vec::new(),
                    messages: keys,
                    text,
                },
            );
        }
    }

    let mut uses = vec![0usize; graph.edges.len()];
    let mut text = String::new();
    let mut last_bucket = None;
    let statements: Vec<TraceStatement> = planned.into_values().collect();
    for st in &statements {
        for &e in &st.edges {
            uses[e] += 1;
        }
        if last_bucket != Some(st.bucket) {
            if last_bucket.is_some() {
                text.push('\n');
            }
            let _ = writeln!(text, "{}", graph.buckets[st.bucket].label());
            last_bucket = Some(st.bucket);
        }
        let _ = writeln!(text, "{}", st.text);
    }
    let edges = graph
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| EdgeUse {
            edge: i,
            name: e.name.clone(),
            axis: e.axis,
            left: e.left.clone(),
            right: e.right.clone(),
            uses: uses[i],
        })
        .collect();
    Ok(Summary {
        text,
        trace: CoverageTrace {
            statements,
            edges,
            dropped,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Json,
    Dot,
}

impl std::str::FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(GraphFormat::Json),
            "dot" => Ok(GraphFormat::Dot),
            other => Err(format!("unknown graph format `{other}` (expected json or dot)")),
        }
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn export_graph(graph: &RelationGraph, format: GraphFormat) -> Vec<u8> {
    match format {
        GraphFormat::Json => {
            let mut out = serde_json::to_vec_pretty(graph).expect("graph serializes");
            out.push(b'\n');
            out
        }
        GraphFormat::Dot => {
            let mut out = String::from("digraph relations {\n");
            for m in &graph.nodes {
                let args: Vec<String> = m
                    .args
                    .iter()
                    .map(|(k, v)| format!("{k}={}", v.as_deref().unwrap_or("unknown")))
                    .collect();
                let label = format!("{}({})\\n{} {}", m.msg_type, args.join(", "), m.source, m.time);
                let _ = writeln!(
                    out,
                    "  \"{}\" [label=\"{}\"];",
                    dot_escape(&m.key().to_string()),
                    dot_escape(&label).replace("\\\\n", "\\n")
                );
            }
            for e in &graph.edges {
                let _ = writeln!(
                    out,
                    "  \"{}\" -> \"{}\" [label=\"{}\", style={}];",
                    dot_escape(&e.left.to_string()),
                    dot_escape(&e.right.to_string()),
                    dot_escape(&e.name),
                    if e.axis == Axis::Synchronic { "solid" } else { "dashed" }
                );
            }
            out.push_str("}\n");
            out.into_bytes()
        }
    }
}

//! Line-oriented parser for domain spec files.
//!
//! Grammar, one statement per line (`#` starts a comment):
//!
//! ```text
//! concept   := "concept" NAME [ "<" NAME ]
//! instance  := "instance" NAME ":" NAME [ "aka" STRING { "," STRING } ]
//! scale     := "scale" NAME "=" NAME { "<" NAME }
//! message   := "message" NAME "(" SLOT ":" NAME { "," SLOT ":" NAME } ")" [ "where" atoms ]
//! relation  := "relation" NAME { option } [ "where" atoms ]
//! option    := "axis" "=" ("synchronic" | "diachronic")
//!            | "left" "=" NAME | "right" "=" NAME
//!            | "distance" ("==" | ">=") INT
//!            | "symmetric"
//! trigger   := "trigger" NAME "on" "[" NAME { "," NAME } "]" [ "requires" "[" NAME { "," NAME } "]" ]
//! atoms     := atom { "&&" atom }
//! atom      := ref ("==" | "!=" | "<" | ">") ref
//!            | ref "==" STRING
//! ref       := ("left" | "right") "." SLOT      (relations)
//!            | SLOT                              (message constraints)
//! NAME      := identifier | STRING
//! ```
//!
//! Identifiers are `[A-Za-z_][A-Za-z0-9_-]*`; strings are double-quoted with
//! `\"` and `\\` escapes.

use std::fmt;

use super::OntologyError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Sym(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefAst {
    pub side: Option<Side>,
    pub slot: String,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RhsAst {
    Ref(RefAst),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomAst {
    pub lhs: RefAst,
    pub op: &'static str,
    pub rhs: RhsAst,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DistanceAst {
    Exactly(i64),
    AtLeast(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatementKind {
    Concept {
        name: String,
        parent: Option<String>,
    },
    Instance {
        name: String,
        concept: String,
        aliases: Vec<String>,
    },
    Scale {
        concept: String,
        values: Vec<String>,
    },
    Message {
        name: String,
        slots: Vec<(String, String)>,
        constraints: Vec<AtomAst>,
    },
    Relation {
        name: String,
        axis: String,
        left: String,
        right: String,
        distance: Option<DistanceAst>,
        symmetric: bool,
        conditions: Vec<AtomAst>,
    },
    Trigger {
        msg_type: String,
        lemmas: Vec<String>,
        requires: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub line: usize,
    pub kind: StatementKind,
}

pub fn parse(text: &str) -> Result<Vec<Statement>, OntologyError> {
    let mut statements = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let tokens = lex_line(raw, line)?;
        if tokens.is_empty() {
            continue;
        }
        let mut parser = LineParser {
            tokens,
            pos: 0,
            line,
            eol_column: raw.chars().count() + 1,
        };
        let kind = parser.statement()?;
        statements.push(Statement { line, kind });
    }
    Ok(statements)
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> OntologyError {
    OntologyError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Renders a name as an identifier when possible, otherwise as a quoted string.
pub(crate) fn quote_name(s: &str) -> String {
    if is_identifier(s) && !is_keyword(s) {
        s.to_string()
    } else {
        quote_string(s)
    }
}

pub(crate) fn quote_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "where" | "aka" | "symmetric" | "on" | "requires")
}

fn lex_line(raw: &str, line: usize) -> Result<Vec<(Tok, usize)>, OntologyError> {
    let chars: Vec<char> = raw.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '-') {
                i += 1;
            }
            tokens.push((Tok::Ident(chars[start..i].iter().collect()), column));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            let value = digits
                .parse()
                .map_err(|_| syntax(line, column, format!("integer `{digits}` out of range")))?;
            tokens.push((Tok::Int(value), column));
            continue;
        }
        if c == '"' {
            let mut value = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(syntax(line, column, "unterminated string")),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => match chars.get(i + 1) {
                        Some(&e @ ('"' | '\\')) => {
                            value.push(e);
                            i += 2;
                        }
                        _ => return Err(syntax(line, i + 1, "invalid escape in string")),
                    },
                    Some(&ch) => {
                        value.push(ch);
                        i += 1;
                    }
                }
            }
            tokens.push((Tok::Str(value), column));
            continue;
        }
        let next = chars.get(i + 1).copied();
        let sym: &'static str = match (c, next) {
            ('=', Some('=')) => "==",
            ('!', Some('=')) => "!=",
            ('>', Some('=')) => ">=",
            ('&', Some('&')) => "&&",
            ('=', _) => "=",
            ('<', _) => "<",
            ('>', _) => ">",
            ('(', _) => "(",
            (')', _) => ")",
            ('[', _) => "[",
            (']', _) => "]",
            (',', _) => ",",
            (':', _) => ":",
            ('.', _) => ".",
            _ => return Err(syntax(line, column, format!("unexpected character `{c}`"))),
        };
        i += sym.len();
        tokens.push((Tok::Sym(sym), column));
    }
    Ok(tokens)
}

struct LineParser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    eol_column: usize,
}

impl LineParser {
    fn column(&self) -> usize {
        self.tokens.get(self.pos).map(|t| t.1).unwrap_or(self.eol_column)
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.0)
    }

    fn error(&self, message: impl Into<String>) -> OntologyError {
        syntax(self.line, self.column(), message)
    }

    fn unexpected(&self, expected: &str) -> OntologyError {
        match self.peek() {
            Some(tok) => self.error(format!("expected {expected}, found {tok}")),
            None => self.error(format!("expected {expected}, found end of line")),
        }
    }

    fn at_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym)
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn expect_sym(&mut self, sym: &'static str) -> Result<(), OntologyError> {
        if self.at_sym(sym) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{sym}`")))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), OntologyError> {
        if self.at_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, OntologyError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn name(&mut self, what: &str) -> Result<String, OntologyError> {
        match self.peek() {
            Some(Tok::Ident(s)) | Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn string(&mut self, what: &str) -> Result<String, OntologyError> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn int(&mut self) -> Result<i64, OntologyError> {
        match self.peek() {
            Some(Tok::Int(i)) => {
                let i = *i;
                self.pos += 1;
                Ok(i)
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    fn end(&self) -> Result<(), OntologyError> {
        if self.pos < self.tokens.len() {
            Err(self.unexpected("end of line"))
        } else {
            Ok(())
        }
    }

    fn statement(&mut self) -> Result<StatementKind, OntologyError> {
        let keyword = self.ident("a statement keyword")?;
        let kind = match keyword.as_str() {
            "concept" => self.concept()?,
            "instance" => self.instance()?,
            "scale" => self.scale()?,
            "message" => self.message()?,
            "relation" => self.relation()?,
            "trigger" => self.trigger()?,
            other => {
                self.pos -= 1;
                return Err(self.error(format!(
                    "unknown statement `{other}` (expected concept, instance, scale, message, relation or trigger)"
                )));
            }
        };
        self.end()?;
        Ok(kind)
    }

    fn concept(&mut self) -> Result<StatementKind, OntologyError> {
        let name = self.name("a concept name")?;
        let parent = if self.at_sym("<") {
            self.pos += 1;
            Some(self.name("a parent concept name")?)
        } else {
            None
        };
        Ok(StatementKind::Concept { name, parent })
    }

    fn instance(&mut self) -> Result<StatementKind, OntologyError> {
        let name = self.name("an instance name")?;
        self.expect_sym(":")?;
        let concept = self.name("a concept name")?;
        let mut aliases = Vec::new();
        if self.at_keyword("aka") {
            self.pos += 1;
            aliases.push(self.string("a quoted alias")?);
            while self.at_sym(",") {
                self.pos += 1;
                aliases.push(self.string("a quoted alias")?);
            }
        }
        Ok(StatementKind::Instance { name, concept, aliases })
    }

    fn scale(&mut self) -> Result<StatementKind, OntologyError> {
        let concept = self.name("a concept name")?;
        self.expect_sym("=")?;
        let mut values = vec![self.name("a scale value")?];
        while self.at_sym("<") {
            self.pos += 1;
            values.push(self.name("a scale value")?);
        }
        Ok(StatementKind::Scale { concept, values })
    }

    fn message(&mut self) -> Result<StatementKind, OntologyError> {
        let name = self.name("a message type name")?;
        self.expect_sym("(")?;
        let mut slots = Vec::new();
        loop {
            let slot = self.ident("a slot name")?;
            self.expect_sym(":")?;
            let concept = self.name("a concept name")?;
            slots.push((slot, concept));
            if self.at_sym(",") {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.expect_sym(")")?;
        let constraints = if self.at_keyword("where") {
            self.pos += 1;
            self.atoms(false)?
        } else {
            Vec::new()
        };
        Ok(StatementKind::Message {
            name,
            slots,
            constraints,
        })
    }

    fn relation(&mut self) -> Result<StatementKind, OntologyError> {
        let name = self.name("a relation name")?;
        let (mut axis, mut left, mut right) = (None, None, None);
        let mut distance = None;
        let mut symmetric = false;
        while self.pos < self.tokens.len() && !self.at_keyword("where") {
            let column = self.column();
            let key = self.ident("a relation option")?;
            match key.as_str() {
                "axis" | "left" | "right" => {
                    self.expect_sym("=")?;
                    let value = self.name(&format!("a value for `{key}`"))?;
                    let target = match key.as_str() {
                        "axis" => &mut axis,
                        "left" => &mut left,
                        _ => &mut right,
                    };
                    if target.replace(value).is_some() {
                        return Err(syntax(self.line, column, format!("`{key}` given twice")));
                    }
                }
                "distance" => {
                    let op = if self.at_sym("==") {
                        "=="
                    } else if self.at_sym(">=") {
                        ">="
                    } else {
                        return Err(self.unexpected("`==` or `>=`"));
                    };
                    self.pos += 1;
                    let k = self.int()?;
                    let value = if op == "==" {
                        DistanceAst::Exactly(k)
                    } else {
                        DistanceAst::AtLeast(k)
                    };
                    if distance.replace(value).is_some() {
                        return Err(syntax(self.line, column, "`distance` given twice"));
                    }
                }
                "symmetric" => {
                    if symmetric {
                        return Err(syntax(self.line, column, "`symmetric` given twice"));
                    }
                    symmetric = true;
                }
                other => {
                    return Err(syntax(
                        self.line,
                        column,
                        format!(
                        "unknown relation option `{other}` (expected axis, left, right, distance, symmetric or where)"
                    ),
                    ))
                }
            }
        }
        let conditions = if self.at_keyword("where") {
            self.pos += 1;
            self.atoms(true)?
        } else {
            Vec::new()
        };
        let require = |v: Option<String>, key: &str| {
            v.ok_or_else(|| self.error(format!("relation `{name}` is missing `{key}=`")))
        };
        let axis = require(axis, "axis")?;
        let left = require(left, "left")?;
        let right = require(right, "right")?;
        Ok(StatementKind::Relation {
            name,
            axis,
            left,
            right,
            distance,
            symmetric,
            conditions,
        })
    }

    fn trigger(&mut self) -> Result<StatementKind, OntologyError> {
        let msg_type = self.name("a message type name")?;
        self.expect_keyword("on")?;
        let lemmas = self.bracket_list("a trigger lemma")?;
        let requires = if self.at_keyword("requires") {
            self.pos += 1;
            self.bracket_list("a named-entity label")?
        } else {
            Vec::new()
        };
        Ok(StatementKind::Trigger {
            msg_type,
            lemmas,
            requires,
        })
    }

    fn bracket_list(&mut self, what: &str) -> Result<Vec<String>, OntologyError> {
        self.expect_sym("[")?;
        let mut items = vec![self.name(what)?];
        while self.at_sym(",") {
            self.pos += 1;
            items.push(self.name(what)?);
        }
        self.expect_sym("]")?;
        Ok(items)
    }

    fn atoms(&mut self, sided: bool) -> Result<Vec<AtomAst>, OntologyError> {
        let mut atoms = vec![self.atom(sided)?];
        while self.at_sym("&&") {
            self.pos += 1;
            atoms.push(self.atom(sided)?);
        }
        Ok(atoms)
    }

    fn slot_ref(&mut self, sided: bool) -> Result<RefAst, OntologyError> {
        let column = self.column();
        let first = self.ident(if sided {
            "`left.<slot>` or `right.<slot>`"
        } else {
            "a slot name"
        })?;
        if sided {
            let side = match first.as_str() {
                "left" => Side::Left,
                "right" => Side::Right,
                _ => return Err(syntax(self.line, column, "expected `left.<slot>` or `right.<slot>`")),
            };
            self.expect_sym(".")?;
            let slot = self.ident("a slot name")?;
            Ok(RefAst {
                side: Some(side),
                slot,
                column,
            })
        } else {
            if self.at_sym(".") {
                return Err(syntax(self.line, column, "message constraints use bare slot names"));
            }
            Ok(RefAst {
                side: None,
                slot: first,
                column,
            })
        }
    }

    fn atom(&mut self, sided: bool) -> Result<AtomAst, OntologyError> {
        let column = self.column();
        let lhs = self.slot_ref(sided)?;
        let op = match self.peek() {
            Some(Tok::Sym(s @ ("==" | "!=" | "<" | ">"))) => *s,
            _ => return Err(self.unexpected("`==`, `!=`, `<` or `>`")),
        };
        self.pos += 1;
        let rhs = match self.peek() {
            Some(Tok::Str(value)) => {
                if op != "==" {
                    return Err(self.error("constants can only be compared with `==`"));
                }
                let value = value.clone();
                self.pos += 1;
                RhsAst::Const(value)
            }
            _ => RhsAst::Ref(self.slot_ref(sided)?),
        };
        Ok(AtomAst { lhs, op, rhs, column })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(text: &str) -> StatementKind {
        let mut statements = parse(text).unwrap();
        assert_eq!(statements.len(), 1);
        statements.remove(0).kind
    }

    fn err_pos(text: &str) -> (usize, usize) {
        match parse(text) {
            Err(OntologyError::Syntax { line, column, .. }) => (line, column),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn parses_taxonomy_lines() {
        assert_eq!(
            one("concept Person < Entity  # agents"),
            StatementKind::Concept {
                name: "Person".into(),
                parent: Some("Entity".into())
            }
        );
        assert_eq!(
            one(r#"instance "Italian government" : Government aka "Rome", "the government""#),
            StatementKind::Instance {
                name: "Italian government".into(),
                concept: "Government".into(),
                aliases: vec!["Rome".into(), "the government".into()],
            }
        );
        assert_eq!(
            one("scale Degree = poor < mediocre < good < excellent"),
            StatementKind::Scale {
                concept: "Degree".into(),
                values: vec!["poor".into(), "mediocre".into(), "good".into(), "excellent".into()],
            }
        );
    }

    #[test]
    fn parses_relation_with_options_and_atoms() {
        let kind = one("relation positive_graduation axis=diachronic left=performance right=performance distance==1 where left.entity == right.entity && left.value < right.value");
        match kind {
            StatementKind::Relation {
                name,
                axis,
                distance,
                symmetric,
                conditions,
                ..
            } => {
                assert_eq!(name, "positive_graduation");
                assert_eq!(axis, "diachronic");
                assert_eq!(distance, Some(DistanceAst::Exactly(1)));
                assert!(!symmetric);
                assert_eq!(conditions.len(), 2);
                assert_eq!(conditions[1].op, "<");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_message_and_trigger() {
        match one("message negotiate(entity_1:Person, entity_2:Person, about:Activity) where entity_1 != entity_2") {
            StatementKind::Message { slots, constraints, .. } => {
                assert_eq!(slots.len(), 3);
                assert_eq!(constraints[0].lhs.side, None);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            one("trigger negotiate on [negotiate, negotiation] requires [PER]"),
            StatementKind::Trigger {
                msg_type: "negotiate".into(),
                lemmas: vec!["negotiate".into(), "negotiation".into()],
                requires: vec!["PER".into()],
            }
        );
    }

    #[test]
    fn reports_line_and_column() {
        assert_eq!(err_pos("concept A\nconcept B <"), (2, 12));
        assert_eq!(
            err_pos("relation r axis=synchronic left=a right=b where left.x ~ right.x"),
            (1, 56)
        );
        assert_eq!(err_pos("bogus line"), (1, 1));
        assert_eq!(
            err_pos("relation r axis=synchronic left=a right=b where x == right.y"),
            (1, 49)
        );
        assert_eq!(err_pos("relation r left=a right=b"), (1, 26));
        assert_eq!(err_pos(r#"instance "open : C"#), (1, 10));
    }

    #[test]
    fn quoting_round_trips() {
        for name in ["plain", "two words", "with\"quote", "where", "a-b"] {
            let line = format!("concept {}", quote_name(name));
            assert_eq!(
                one(&line),
                StatementKind::Concept {
                    name: name.into(),
                    parent: None
                }
            );
        }
    }
}

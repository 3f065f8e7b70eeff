//! N-Triples (RDF 1.1) writer and a reader for the subset the writer emits.
//!
//! Output is one statement per line, lines sorted bytewise, each line
//! terminated by `\n`. Labels and descriptions are not written.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use super::{BlankEntity, BlankKey, EntityRef, Iri, KnowledgeGraph, LiteralValue, Node, NodeKey, Triple, XSD};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot serialize triple {triple}: {reason}")]
pub struct SerializeError {
    pub triple: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

pub fn to_ntriples(graph: &KnowledgeGraph) -> Result<String, SerializeError> {
    let blanks = blank_labels(graph);
    let mut lines = Vec::with_capacity(graph.len());
    for triple in graph.triples() {
        lines.push(render_triple(triple, &blanks)?);
    }
    lines.sort_unstable();
    let mut out = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Blank node labels: anchored nodes are numbered `b0, b1, ...` in mention
/// order; re-imported (unanchored) nodes keep their label.
fn blank_labels(graph: &KnowledgeGraph) -> BTreeMap<BlankKey, String> {
    let mut anchored = BTreeSet::new();
    let mut labelled = BTreeSet::new();
    for t in graph.triples() {
        for node in [&t.subject, &t.object] {
            if let NodeKey::Blank(key) = node.key() {
                match key {
                    BlankKey::Anchor(span) => {
                        anchored.insert(span);
                    }
                    BlankKey::Label(label) => {
                        labelled.insert(label);
                    }
                }
            }
        }
    }
    let mut labels: BTreeMap<BlankKey, String> =
        labelled.iter().map(|l| (BlankKey::Label(l.clone()), l.clone())).collect();
    let mut next = 0usize;
    for span in anchored {
        let label = loop {
            let candidate = format!("b{next}");
            next += 1;
            if !labelled.contains(&candidate) {
                break candidate;
            }
        };
        labels.insert(BlankKey::Anchor(span), label);
    }
    labels
}

fn render_triple(t: &Triple, blanks: &BTreeMap<BlankKey, String>) -> Result<String, SerializeError> {
    let fail = |reason: String| SerializeError { triple: describe(t), reason };
    if t.subject.is_literal() {
        return Err(fail("literal in subject position".into()));
    }
    let mut line = String::new();
    render_node(&mut line, &t.subject, blanks).map_err(fail)?;
    line.push(' ');
    render_iri(&mut line, &t.predicate.iri).map_err(fail)?;
    line.push(' ');
    render_node(&mut line, &t.object, blanks).map_err(fail)?;
    line.push_str(" .");
    Ok(line)
}

fn describe(t: &Triple) -> String {
    format!("({}, {}, {})", node_text(&t.subject), t.predicate.iri, node_text(&t.object))
}

fn node_text(n: &Node) -> String {
    match n {
        Node::Entity(e) => e.iri.to_string(),
        Node::Unlinked(b) => format!("unlinked {:?}", b.label),
        Node::Literal(l) => format!("{:?}^^{}", l.lexical, l.datatype),
    }
}

fn render_node(out: &mut String, node: &Node, blanks: &BTreeMap<BlankKey, String>) -> Result<(), String> {
    match node {
        Node::Entity(e) => render_iri(out, &e.iri),
        Node::Unlinked(_) => {
            let NodeKey::Blank(key) = node.key() else { unreachable!() };
            let label = &blanks[&key];
            if !is_blank_label(label) {
                return Err(format!("invalid blank node label {label:?}"));
            }
            out.push_str("_:");
            out.push_str(label);
            Ok(())
        }
        Node::Literal(l) => {
            out.push('"');
            escape_into(out, &l.lexical);
            out.push_str("\"^^");
            render_iri(out, &l.datatype)
        }
    }
}

fn render_iri(out: &mut String, iri: &Iri) -> Result<(), String> {
    if !iri.is_valid() {
        return Err(format!("invalid IRI {:?}", iri.as_str()));
    }
    out.push('<');
    out.push_str(iri.as_str());
    out.push('>');
    Ok(())
}

fn escape_into(out: &mut String, value: &str) {
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
}

fn is_blank_label(label: &str) -> bool {
    let mut chars = label.chars();
    chars.next().is_some_and(|c| c.is_alphanumeric() || c == '_')
        && chars.clone().all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !label.ends_with('.')
}

/// Parses N-Triples produced by [`to_ntriples`]; blank lines and `#` comments
/// are skipped. Entity labels are set to the IRI's local name.
pub fn from_ntriples(text: &str) -> Result<KnowledgeGraph, ParseError> {
    let mut graph = KnowledgeGraph::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim_matches([' ', '\t']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut cursor = Cursor { rest: trimmed, line };
        let subject = cursor.subject()?;
        cursor.whitespace(true)?;
        let predicate = cursor.iri()?;
        cursor.whitespace(true)?;
        let object = cursor.object()?;
        cursor.whitespace(false)?;
        cursor.terminator()?;
        let label = predicate.local_name().to_string();
        let triple = Triple::new(subject, EntityRef { iri: predicate, label, description: String::new() }, object)
            .map_err(|e| ParseError { line, message: e.to_string() })?;
        graph.insert(triple);
    }
    Ok(graph)
}

struct Cursor<'a> {
    rest: &'a str,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, message: message.into() }
    }

    fn whitespace(&mut self, required: bool) -> Result<(), ParseError> {
        let trimmed = self.rest.trim_start_matches([' ', '\t']);
        if required && trimmed.len() == self.rest.len() {
            return Err(self.error("expected whitespace"));
        }
        self.rest = trimmed;
        Ok(())
    }

    fn terminator(&mut self) -> Result<(), ParseError> {
        let Some(after) = self.rest.strip_prefix('.') else {
            return Err(self.error("statement must end with \" .\""));
        };
        let after = after.trim_start_matches([' ', '\t']);
        if after.is_empty() || after.starts_with('#') {
            Ok(())
        } else {
            Err(self.error(format!("unexpected trailing content {after:?}")))
        }
    }

    fn subject(&mut self) -> Result<Node, ParseError> {
        if self.rest.starts_with("_:") {
            self.blank()
        } else {
            let iri = self.iri()?;
            Ok(entity_node(iri))
        }
    }

    fn object(&mut self) -> Result<Node, ParseError> {
        if self.rest.starts_with("_:") {
            self.blank()
        } else if self.rest.starts_with('"') {
            self.literal()
        } else {
            let iri = self.iri()?;
            Ok(entity_node(iri))
        }
    }

    fn iri(&mut self) -> Result<Iri, ParseError> {
        let Some(body) = self.rest.strip_prefix('<') else {
            return Err(self.error("expected IRI"));
        };
        let Some(close) = body.find('>') else {
            return Err(self.error("unterminated IRI"));
        };
        let value = &body[..close];
        self.rest = &body[close + 1..];
        Iri::parse(value).map_err(|_| self.error(format!("invalid IRI {value:?}")))
    }

    fn blank(&mut self) -> Result<Node, ParseError> {
        let body = &self.rest[2..];
        let end = body.find([' ', '\t']).unwrap_or(body.len());
        let label = &body[..end];
        if !is_blank_label(label) {
            return Err(self.error(format!("invalid blank node label {label:?}")));
        }
        self.rest = &body[end..];
        Ok(Node::Unlinked(BlankEntity { label: label.to_string(), anchor: None }))
    }

    fn literal(&mut self) -> Result<Node, ParseError> {
        let mut lexical = String::new();
        let mut chars = self.rest[1..].char_indices();
        let consumed = loop {
            let Some((i, c)) = chars.next() else {
                return Err(self.error("unterminated string literal"));
            };
            match c {
                '"' => break i + 2,
                '\\' => {
                    let esc = chars.next().map(|(_, c)| c);
                    match esc {
                        Some('t') => lexical.push('\t'),
                        Some('b') => lexical.push('\u{8}'),
                        Some('n') => lexical.push('\n'),
                        Some('r') => lexical.push('\r'),
                        Some('f') => lexical.push('\u{c}'),
                        Some('"') => lexical.push('"'),
                        Some('\'') => lexical.push('\''),
                        Some('\\') => lexical.push('\\'),
                        Some(u @ ('u' | 'U')) => {
                            let width = if u == 'u' { 4 } else { 8 };
                            let hex: String = (0..width).filter_map(|_| chars.next().map(|(_, c)| c)).collect();
                            let decoded = (hex.len() == width)
                                .then(|| u32::from_str_radix(&hex, 16).ok())
                                .flatten()
                                .and_then(char::from_u32);
                            match decoded {
                                Some(c) => lexical.push(c),
                                None => return Err(self.error(format!("invalid \\{u} escape"))),
                            }
                        }
                        _ => return Err(self.error("invalid escape sequence")),
                    }
                }
                '\n' | '\r' => return Err(self.error("raw line break in literal")),
                c => lexical.push(c),
            }
        };
        self.rest = &self.rest[consumed..];
        let datatype = if let Some(after) = self.rest.strip_prefix("^^") {
            self.rest = after;
            self.iri()?
        } else if self.rest.starts_with('@') {
            return Err(self.error("language-tagged literals are not supported"));
        } else {
            Iri::new_unchecked(format!("{XSD}string"))
        };
        Ok(Node::Literal(LiteralValue::from_datatype(lexical, datatype)))
    }
}

fn entity_node(iri: Iri) -> Node {
    let label = iri.local_name().to_string();
    Node::Entity(EntityRef { iri, label, description: String::new() })
}

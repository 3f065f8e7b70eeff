//! Domain types shared across the construction pipeline.
//!
//! Everything here is a plain value type. Mentions are addressed by
//! character offsets (Unicode scalar values), never by byte offsets.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod ntriples;

pub use ntriples::{from_ntriples, to_ntriples, ParseError, SerializeError};

/// Wikidata entity namespace.
pub const WD_ENTITY: &str = "http://www.wikidata.org/entity/";
/// Wikidata truthy direct-claim property namespace.
pub const WD_DIRECT: &str = "http://www.wikidata.org/prop/direct/";
/// XML Schema datatype namespace.
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid IRI {0:?}")]
    InvalidIri(String),
    #[error("span {start}..{end} is not valid for a text of {len} characters")]
    InvalidSpan { start: usize, end: usize, len: usize },
    #[error("a literal cannot be the subject of a triple")]
    LiteralSubject,
}

/// An absolute IRI.
///
/// Construction through [`Iri::parse`] validates; [`Iri::new_unchecked`] and
/// deserialization do not, so serializers re-check with [`Iri::is_valid`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Iri(String);

impl Iri {
    pub fn parse(value: impl Into<String>) -> Result<Self, ModelError> {
        let value = value.into();
        if is_valid_iri(&value) {
            Ok(Self(value))
        } else {
            Err(ModelError::InvalidIri(value))
        }
    }

    pub fn new_unchecked(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn xsd(local: &str) -> Self {
        Self(format!("{XSD}{local}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_valid(&self) -> bool {
        is_valid_iri(&self.0)
    }

    /// The segment after the last `/` or `#`, e.g. `Q183`.
    pub fn local_name(&self) -> &str {
        self.0.rsplit(['/', '#']).next().unwrap_or(&self.0)
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Scheme followed by characters legal inside an N-Triples `IRIREF`.
pub fn is_valid_iri(value: &str) -> bool {
    let Some((scheme, rest)) = value.split_once(':') else {
        return false;
    };
    let mut scheme_chars = scheme.chars();
    let scheme_ok = scheme_chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && scheme_chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'));
    scheme_ok
        && !rest.is_empty()
        && value.chars().all(|c| {
            !(c <= ' ' || c.is_whitespace() || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\'))
        })
}

/// Half-open character interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlap(&self, other: &Span) -> usize {
        self.end.min(other.end).saturating_sub(self.start.max(other.start))
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.overlap(other) > 0
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }

    /// Checks `0 <= start < end <= len(text)`.
    pub fn check(&self, text: &str) -> Result<(), ModelError> {
        let len = char_len(text);
        if self.start < self.end && self.end <= len {
            Ok(())
        } else {
            Err(ModelError::InvalidSpan { start: self.start, end: self.end, len })
        }
    }

    /// The substring covered by this span, if it is valid for `text`.
    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        self.check(text).ok()?;
        let from = byte_offset(text, self.start);
        let to = byte_offset(text, self.end);
        Some(&text[from..to])
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte offset of the `chars`-th character (or `text.len()` past the end).
pub fn byte_offset(text: &str, chars: usize) -> usize {
    text.char_indices().nth(chars).map_or(text.len(), |(i, _)| i)
}

/// The 18 OntoNotes 5 classes plus noun-phrase concepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityType {
    Person,
    Norp,
    Fac,
    Org,
    Gpe,
    Loc,
    Product,
    Event,
    WorkOfArt,
    Law,
    Language,
    Date,
    Time,
    Percent,
    Money,
    Quantity,
    Ordinal,
    Cardinal,
    Concept,
}

impl EntityType {
    pub const ALL: [EntityType; 19] = [
        Self::Person,
        Self::Norp,
        Self::Fac,
        Self::Org,
        Self::Gpe,
        Self::Loc,
        Self::Product,
        Self::Event,
        Self::WorkOfArt,
        Self::Law,
        Self::Language,
        Self::Date,
        Self::Time,
        Self::Percent,
        Self::Money,
        Self::Quantity,
        Self::Ordinal,
        Self::Cardinal,
        Self::Concept,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Person => "PERSON",
            Self::Norp => "NORP",
            Self::Fac => "FAC",
            Self::Org => "ORG",
            Self::Gpe => "GPE",
            Self::Loc => "LOC",
            Self::Product => "PRODUCT",
            Self::Event => "EVENT",
            Self::WorkOfArt => "WORK_OF_ART",
            Self::Law => "LAW",
            Self::Language => "LANGUAGE",
            Self::Date => "DATE",
            Self::Time => "TIME",
            Self::Percent => "PERCENT",
            Self::Money => "MONEY",
            Self::Quantity => "QUANTITY",
            Self::Ordinal => "ORDINAL",
            Self::Cardinal => "CARDINAL",
            Self::Concept => "CONCEPT",
        }
    }

    /// True for the seven classes stored as literals instead of being linked.
    pub fn is_literal(&self) -> bool {
        matches!(
            self,
            Self::Percent | Self::Money | Self::Quantity | Self::Cardinal | Self::Ordinal | Self::Date | Self::Time
        )
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_uppercase();
        Self::ALL.into_iter().find(|t| t.as_str() == wanted).ok_or_else(|| format!("unknown entity type {s:?}"))
    }
}

/// A recognized text span.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub span: Span,
    pub surface: String,
    pub etype: EntityType,
    /// Identifier of the recognizer that produced this mention.
    pub source: String,
    /// Gazetteer-supplied link preference, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preferred_iri: Option<Iri>,
}

impl Mention {
    /// Builds a mention whose surface is read from `text`.
    pub fn from_text(text: &str, span: Span, etype: EntityType, source: impl Into<String>) -> Result<Self, ModelError> {
        let surface = span
            .slice(text)
            .ok_or(ModelError::InvalidSpan { start: span.start, end: span.end, len: char_len(text) })?
            .to_string();
        Ok(Self { span, surface, etype, source: source.into(), preferred_iri: None })
    }

    /// Span bounds are valid and the surface matches the text.
    pub fn is_valid_for(&self, text: &str) -> bool {
        self.span.slice(text) == Some(self.surface.as_str())
    }
}

/// Display-level reference to a knowledge-base item.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    pub iri: Iri,
    pub label: String,
    #[serde(default)]
    pub description: String,
}

impl EntityRef {
    pub fn new(iri: Iri, label: impl Into<String>, description: &str) -> Self {
        Self { iri, label: label.into(), description: description.trim().to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiteralKind {
    Numeric,
    Temporal,
}

/// A typed literal value (numbers, dates and times).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LiteralValue {
    pub kind: LiteralKind,
    pub lexical: String,
    pub datatype: Iri,
}

impl LiteralValue {
    pub fn new(kind: LiteralKind, lexical: impl Into<String>, xsd_local: &str) -> Self {
        Self { kind, lexical: lexical.into(), datatype: Iri::xsd(xsd_local) }
    }

    /// Infers the kind from the datatype; plain strings count as temporal.
    pub fn from_datatype(lexical: impl Into<String>, datatype: Iri) -> Self {
        let kind = match datatype.as_str().strip_prefix(XSD) {
            Some("decimal" | "integer" | "double" | "float") => LiteralKind::Numeric,
            _ => LiteralKind::Temporal,
        };
        Self { kind, lexical: lexical.into(), datatype }
    }
}

/// One entity or property of the knowledge base, as held by the retrieval index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbRecord {
    pub iri: Iri,
    pub label: String,
    pub description: String,
    pub aliases: Vec<String>,
    pub search_key: String,
    /// In-degree over the ingested statement set.
    pub commonness: u64,
}

pub type EntityRecord = KbRecord;
pub type PropertyRecord = KbRecord;

impl KbRecord {
    pub fn new(
        iri: Iri,
        label: impl Into<String>,
        description: impl Into<String>,
        aliases: Vec<String>,
        commonness: u64,
    ) -> Self {
        let label = label.into();
        let description = description.into().trim().to_string();
        let search_key = std::iter::once(label.as_str())
            .chain(std::iter::once(description.as_str()))
            .chain(aliases.iter().map(String::as_str))
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        Self { iri, label, description, aliases, search_key, commonness }
    }

    pub fn entity_ref(&self) -> EntityRef {
        EntityRef { iri: self.iri.clone(), label: self.label.clone(), description: self.description.clone() }
    }
}

/// A retrieved record with its relevance and combined score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub record: KbRecord,
    pub relevance: f64,
    pub score: f64,
}

/// Descending score, then ascending IRI.
pub fn rank_order(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.record.iri.cmp(&b.record.iri))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Resolution {
    Linked { candidates: Vec<ScoredCandidate>, selected: usize },
    Literal { value: LiteralValue },
    Unlinked,
}

/// A mention together with how it was resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedMention {
    pub mention: Mention,
    pub resolution: Resolution,
}

impl LinkedMention {
    pub fn selected(&self) -> Option<&ScoredCandidate> {
        match &self.resolution {
            Resolution::Linked { candidates, selected } => candidates.get(*selected),
            _ => None,
        }
    }

    pub fn candidates(&self) -> &[ScoredCandidate] {
        match &self.resolution {
            Resolution::Linked { candidates, .. } => candidates,
            _ => &[],
        }
    }

    /// The graph node this mention currently stands for.
    pub fn node(&self) -> Node {
        match &self.resolution {
            Resolution::Linked { .. } => match self.selected() {
                Some(c) => Node::Entity(c.record.entity_ref()),
                None => self.unlinked_node(),
            },
            Resolution::Literal { value } => Node::Literal(value.clone()),
            Resolution::Unlinked => self.unlinked_node(),
        }
    }

    fn unlinked_node(&self) -> Node {
        Node::Unlinked(BlankEntity { label: self.mention.surface.clone(), anchor: Some(self.mention.span) })
    }

    /// `Linked` must carry a valid selection; literals only for literal types.
    pub fn is_consistent(&self) -> bool {
        match &self.resolution {
            Resolution::Linked { candidates, selected } => *selected < candidates.len(),
            Resolution::Literal { .. } => self.mention.etype.is_literal(),
            Resolution::Unlinked => true,
        }
    }
}

/// An entity the user chose to leave unlinked; exported as a blank node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlankEntity {
    pub label: String,
    /// The mention span the entity was created from. Absent for re-imported graphs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Entity(EntityRef),
    Unlinked(BlankEntity),
    Literal(LiteralValue),
}

impl Node {
    pub fn key(&self) -> NodeKey {
        match self {
            Node::Entity(e) => NodeKey::Iri(e.iri.clone()),
            Node::Unlinked(b) => NodeKey::Blank(match b.anchor {
                Some(span) => BlankKey::Anchor(span),
                None => BlankKey::Label(b.label.clone()),
            }),
            Node::Literal(l) => NodeKey::Literal { lexical: l.lexical.clone(), datatype: l.datatype.clone() },
        }
    }

    pub fn iri(&self) -> Option<&Iri> {
        match self {
            Node::Entity(e) => Some(&e.iri),
            _ => None,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Node::Entity(e) => &e.label,
            Node::Unlinked(b) => &b.label,
            Node::Literal(l) => &l.lexical,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Node::Literal(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlankKey {
    Anchor(Span),
    Label(String),
}

/// Identity of a node, ignoring display metadata.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKey {
    Iri(Iri),
    Blank(BlankKey),
    Literal { lexical: String, datatype: Iri },
}

/// Identity of a statement: `(subject, predicate, object)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripleKey {
    pub subject: NodeKey,
    pub predicate: Iri,
    pub object: NodeKey,
}

/// Subject and object mention spans a triple was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub subject: Span,
    pub object: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Node,
    pub predicate: EntityRef,
    pub object: Node,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Triple {
    pub fn new(subject: Node, predicate: EntityRef, object: Node) -> Result<Self, ModelError> {
        if subject.is_literal() {
            return Err(ModelError::LiteralSubject);
        }
        Ok(Self { subject, predicate, object, provenance: None })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn key(&self) -> TripleKey {
        TripleKey { subject: self.subject.key(), predicate: self.predicate.iri.clone(), object: self.object.key() }
    }

    pub fn mentions_node(&self, node: &NodeKey) -> bool {
        &self.subject.key() == node || &self.object.key() == node
    }
}

/// A set of triples plus the text and mentions they were authored from.
///
/// Triples are kept sorted by [`TripleKey`] with duplicates removed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    #[serde(default)]
    pub source_text: String,
    #[serde(default)]
    pub mentions: Vec<LinkedMention>,
    #[serde(default)]
    triples: Vec<Triple>,
}

impl KnowledgeGraph {
    pub fn new(source_text: impl Into<String>, mentions: Vec<LinkedMention>) -> Self {
        Self { source_text: source_text.into(), mentions, triples: Vec::new() }
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Adds a triple; returns false when an equal statement is already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        let key = triple.key();
        match self.triples.binary_search_by(|t| t.key().cmp(&key)) {
            Ok(_) => false,
            Err(at) => {
                self.triples.insert(at, triple);
                true
            }
        }
    }

    pub fn remove(&mut self, index: usize) -> Option<Triple> {
        (index < self.triples.len()).then(|| self.triples.remove(index))
    }

    pub fn retain(&mut self, keep: impl FnMut(&Triple) -> bool) {
        self.triples.retain(keep);
    }

    /// Rewrites every node, then restores ordering and uniqueness.
    pub fn map_nodes(&mut self, mut f: impl FnMut(&Node) -> Option<Node>) {
        for t in &mut self.triples {
            if let Some(n) = f(&t.subject) {
                t.subject = n;
            }
            if let Some(n) = f(&t.object) {
                t.object = n;
            }
        }
        self.normalize();
    }

    pub fn keys(&self) -> BTreeSet<TripleKey> {
        self.triples.iter().map(Triple::key).collect()
    }

    /// Re-establishes the sorted, duplicate-free order (e.g. after deserialization).
    pub fn normalize(&mut self) {
        self.triples.sort_by_cached_key(Triple::key);
        self.triples.dedup_by(|a, b| a.key() == b.key());
    }
}

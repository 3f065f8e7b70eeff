//! User corrections applied to a session graph.
//!
//! Mentions are addressed by their character span and triples by their
//! position in the graph's sorted triple list. Every edit either applies
//! completely or returns an error and leaves the graph untouched.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use kgforge_core::index::{KbIndex, RecordKind, RetrievalConfig};
use kgforge_core::model::{
    EntityType, Iri, KnowledgeGraph, LinkedMention, Mention, Node, Provenance, Resolution, ScoredCandidate, Span,
    Triple,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Edit {
    /// Links a mention to `iri`, or leaves it unlinked when `iri` is absent.
    RelinkMention {
        mention: Span,
        #[serde(default)]
        iri: Option<String>,
    },
    /// Removes a mention and every triple referring to its node.
    DeleteEntity {
        mention: Span,
    },
    DeleteRelation {
        triple: usize,
    },
    AddEntity {
        span: Span,
        #[serde(default)]
        iri: Option<String>,
    },
    AddRelation {
        subject: Span,
        object: Span,
        property: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("no mention at {}..{}", .0.start, .0.end)]
    UnknownMention(Span),
    #[error("span {}..{} is not valid for the text", .0.start, .0.end)]
    BadSpan(Span),
    #[error("span {}..{} overlaps an existing mention", .0.start, .0.end)]
    Overlap(Span),
    #[error("unknown {kind} {iri}")]
    UnknownIri { kind: &'static str, iri: String },
    #[error("no triple at position {0}")]
    UnknownTriple(usize),
    #[error("{0}")]
    Invalid(String),
}

/// Accepts full IRIs and bare identifiers such as "Q64".
fn expand(index: &KbIndex, kind: RecordKind, raw: &str) -> Iri {
    let raw = raw.trim();
    if raw.contains(':') {
        Iri::new_unchecked(raw)
    } else {
        match kind {
            RecordKind::Entity => index.namespaces().entity(raw),
            RecordKind::Property => index.namespaces().property(raw),
        }
    }
}

fn find_mention(graph: &KnowledgeGraph, span: Span) -> Result<usize, EditError> {
    graph.mentions.iter().position(|m| m.mention.span == span).ok_or(EditError::UnknownMention(span))
}

/// Rebuilds the triple set, mapping or dropping each triple.
fn rewrite(graph: &mut KnowledgeGraph, mut f: impl FnMut(Triple) -> Option<Triple>) {
    let mut out = KnowledgeGraph::new(std::mem::take(&mut graph.source_text), std::mem::take(&mut graph.mentions));
    for t in graph.triples().to_vec() {
        if let Some(t) = f(t) {
            out.insert(t);
        }
    }
    *graph = out;
}

/// The candidate for `iri`: from the mention's list if present, else the
/// indexed record with score 0.
fn candidate_for(
    index: &KbIndex,
    candidates: &[ScoredCandidate],
    raw: &str,
) -> Result<(Vec<ScoredCandidate>, usize), EditError> {
    let iri = expand(index, RecordKind::Entity, raw);
    let mut candidates = candidates.to_vec();
    if let Some(i) = candidates.iter().position(|c| c.record.iri == iri) {
        return Ok((candidates, i));
    }
    let record =
        index.entities().get(&iri).ok_or_else(|| EditError::UnknownIri { kind: "entity", iri: iri.to_string() })?;
    candidates.push(ScoredCandidate { record: record.clone(), relevance: 0.0, score: 0.0 });
    let last = candidates.len() - 1;
    Ok((candidates, last))
}

fn relink(graph: &mut KnowledgeGraph, index: &KbIndex, span: Span, iri: Option<&str>) -> Result<(), EditError> {
    let at = find_mention(graph, span)?;
    let current = &graph.mentions[at];
    if matches!(current.resolution, Resolution::Literal { .. }) {
        return Err(EditError::Invalid("literal mentions cannot be linked".into()));
    }
    let resolution = match iri {
        None => Resolution::Unlinked,
        Some(raw) => {
            let (candidates, selected) = candidate_for(index, current.candidates(), raw)?;
            Resolution::Linked { candidates, selected }
        }
    };
    let old = current.node().key();
    graph.mentions[at].resolution = resolution;
    let node = graph.mentions[at].node();
    rewrite(graph, |mut t| {
        let (from_subject, from_object) = match t.provenance {
            Some(p) => (p.subject == span, p.object == span),
            None => (t.subject.key() == old, t.object.key() == old),
        };
        if from_subject {
            t.subject = node.clone();
        }
        if from_object {
            t.object = node.clone();
        }
        Some(t)
    });
    Ok(())
}

fn delete_entity(graph: &mut KnowledgeGraph, span: Span) -> Result<(), EditError> {
    let at = find_mention(graph, span)?;
    let removed = graph.mentions.remove(at);
    let key = removed.node().key();
    rewrite(graph, |t| {
        let by_span = t.provenance.is_some_and(|p| p.subject == span || p.object == span);
        (!by_span && !t.mentions_node(&key)).then_some(t)
    });
    Ok(())
}

fn add_entity(
    graph: &mut KnowledgeGraph,
    index: &KbIndex,
    retrieval: &RetrievalConfig,
    span: Span,
    iri: Option<&str>,
) -> Result<(), EditError> {
    if span.is_empty() || span.check(&graph.source_text).is_err() {
        return Err(EditError::BadSpan(span));
    }
    if graph.mentions.iter().any(|m| m.mention.span.overlaps(&span)) {
        return Err(EditError::Overlap(span));
    }
    let mention = Mention::from_text(&graph.source_text, span, EntityType::Concept, "user")
        .map_err(|_| EditError::BadSpan(span))?;
    let resolution = match iri {
        None => Resolution::Unlinked,
        Some(raw) => {
            let found = index.search(RecordKind::Entity, &mention.surface, retrieval);
            let (candidates, selected) = candidate_for(index, &found, raw)?;
            Resolution::Linked { candidates, selected }
        }
    };
    let at = graph.mentions.partition_point(|m| m.mention.span < span);
    graph.mentions.insert(at, LinkedMention { mention, resolution });
    Ok(())
}

fn add_relation(
    graph: &mut KnowledgeGraph,
    index: &KbIndex,
    subject: Span,
    object: Span,
    property: &str,
) -> Result<(), EditError> {
    if subject == object {
        return Err(EditError::Invalid("subject and object must be different mentions".into()));
    }
    let s = graph.mentions[find_mention(graph, subject)?].node();
    let o = graph.mentions[find_mention(graph, object)?].node();
    match (&s, &o) {
        (Node::Literal(_), _) => return Err(EditError::Invalid("a literal cannot be a subject".into())),
        (Node::Unlinked(_), Node::Literal(_)) => {
            return Err(EditError::Invalid("a literal object needs a linked subject".into()))
        }
        _ => {}
    }
    let iri = expand(index, RecordKind::Property, property);
    let record =
        index.properties().get(&iri).ok_or_else(|| EditError::UnknownIri { kind: "property", iri: iri.to_string() })?;
    let triple = Triple::new(s, record.entity_ref(), o)
        .map_err(|e| EditError::Invalid(e.to_string()))?
        .with_provenance(Provenance { subject, object });
    graph.insert(triple);
    Ok(())
}

/// Applies one edit; on error the graph is unchanged. `retrieval` supplies
/// the candidate list of a newly added mention.
pub fn apply_edit(
    graph: &mut KnowledgeGraph,
    edit: &Edit,
    index: &KbIndex,
    retrieval: &RetrievalConfig,
) -> Result<(), EditError> {
    let mut work = graph.clone();
    match edit {
        Edit::RelinkMention { mention, iri } => relink(&mut work, index, *mention, iri.as_deref())?,
        Edit::DeleteEntity { mention } => delete_entity(&mut work, *mention)?,
        Edit::DeleteRelation { triple } => {
            work.remove(*triple).ok_or(EditError::UnknownTriple(*triple))?;
        }
        Edit::AddEntity { span, iri } => add_entity(&mut work, index, retrieval, *span, iri.as_deref())?,
        Edit::AddRelation { subject, object, property } => add_relation(&mut work, index, *subject, *object, property)?,
    }
    *graph = work;
    Ok(())
}

//! Knowledge fusion: triple candidates from the cartesian product of subject
//! and object candidates, scored by mean retrieval score, an existence boost
//! and an entailment probability.

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::index::statements::{FactStore, StatementObject};
use crate::index::tokenize::tokens;
use crate::model::{
    KnowledgeGraph, LinkedMention, LiteralValue, Node, NodeKey, PropertyRecord, Provenance, Resolution,
    ScoredCandidate, Span, Triple,
};
use crate::relation::ExtractedRelation;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid fusion config: {0}")]
pub struct FusionConfigError(String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub boost_factor: f64,
    /// Stand-in retrieval score for literal objects.
    pub literal_score: f64,
    /// Per-relation cap on candidates; the highest base scores are kept.
    pub max_candidates_per_relation: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { boost_factor: 3.0, literal_score: 1.0, max_candidates_per_relation: 1024 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionConfigError> {
        if !(self.boost_factor >= 1.0 && self.boost_factor.is_finite()) {
            return Err(FusionConfigError(format!("boost_factor must be >= 1, got {}", self.boost_factor)));
        }
        if !(self.literal_score > 0.0 && self.literal_score <= 1.0) {
            return Err(FusionConfigError(format!("literal_score must be in (0, 1], got {}", self.literal_score)));
        }
        if self.max_candidates_per_relation == 0 {
            return Err(FusionConfigError("max_candidates_per_relation must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CandidateObject {
    Entity(ScoredCandidate),
    Literal(LiteralValue),
}

impl CandidateObject {
    pub fn node(&self) -> Node {
        match self {
            Self::Entity(c) => Node::Entity(c.record.entity_ref()),
            Self::Literal(v) => Node::Literal(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleCandidate {
    pub subject: ScoredCandidate,
    pub predicate: PropertyRecord,
    pub object: CandidateObject,
    pub base_score: f64,
    pub existence_boosted: bool,
    pub nli_probability: f64,
    pub final_score: f64,
}

impl TripleCandidate {
    /// `base * (boost factor if boosted) * probability`.
    pub fn recompute(&mut self, config: &FusionConfig) {
        let boost = if self.existence_boosted { config.boost_factor } else { 1.0 };
        self.final_score = self.base_score * boost * self.nli_probability;
    }

    pub fn object_key(&self) -> NodeKey {
        self.object.node().key()
    }

    pub fn to_triple(&self, provenance: Provenance) -> Triple {
        Triple::new(Node::Entity(self.subject.record.entity_ref()), self.predicate.entity_ref(), self.object.node())
            .expect("candidate subjects are entities")
            .with_provenance(provenance)
    }
}

/// The candidates of one extracted relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationCandidates {
    pub relation: ExtractedRelation,
    /// Spans of the mentions the relation arguments were matched to.
    pub provenance: Provenance,
    pub candidates: Vec<TripleCandidate>,
}

/// Mean of subject and object scores; literal objects count as `literal_score`.
pub fn base_score(subject_score: f64, object_score: Option<f64>, literal_score: f64) -> f64 {
    (subject_score + object_score.unwrap_or(literal_score)) / 2.0
}

/// The mention with exactly `span`, otherwise the one overlapping it most
/// (earliest on ties).
pub fn match_mention(mentions: &[LinkedMention], span: Span) -> Option<&LinkedMention> {
    if let Some(exact) = mentions.iter().find(|m| m.mention.span == span) {
        return Some(exact);
    }
    mentions.iter().filter(|m| m.mention.span.overlap(&span) > 0).max_by(|a, b| {
        a.mention
            .span
            .overlap(&span)
            .cmp(&b.mention.span.overlap(&span))
            .then(b.mention.span.start.cmp(&a.mention.span.start))
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fusion {
    pub relations: Vec<RelationCandidates>,
    pub warnings: Vec<String>,
}

/// Builds candidates for every relation with a linked property. Literal or
/// unlinked subjects and unlinked objects give an empty candidate list.
pub fn fuse(mentions: &[LinkedMention], relations: &[ExtractedRelation], config: &FusionConfig) -> Fusion {
    let mut out = Fusion::default();
    for relation in relations {
        let Some(property) = &relation.linked_property else {
            continue;
        };
        let (Some(subject), Some(object)) =
            (match_mention(mentions, relation.subject), match_mention(mentions, relation.object))
        else {
            out.warnings.push(format!(
                "relation {:?} {}-{} dropped: an argument overlaps no mention",
                relation.predicate_surface, relation.subject, relation.object
            ));
            continue;
        };
        let provenance = Provenance { subject: subject.mention.span, object: object.mention.span };
        if provenance.subject == provenance.object {
            out.warnings.push(format!(
                "relation {:?} dropped: both arguments match the mention at {}",
                relation.predicate_surface, provenance.subject
            ));
            continue;
        }
        let subjects: &[ScoredCandidate] = match &subject.resolution {
            Resolution::Linked { candidates, .. } => candidates,
            _ => &[],
        };
        let objects: Vec<CandidateObject> = match &object.resolution {
            Resolution::Linked { candidates, .. } => candidates.iter().cloned().map(CandidateObject::Entity).collect(),
            Resolution::Literal { value } => vec![CandidateObject::Literal(value.clone())],
            Resolution::Unlinked => vec![],
        };
        let mut candidates = Vec::with_capacity(subjects.len() * objects.len());
        for s in subjects {
            for o in &objects {
                let object_score = match o {
                    CandidateObject::Entity(c) => Some(c.score),
                    CandidateObject::Literal(_) => None,
                };
                let base = base_score(s.score, object_score, config.literal_score);
                candidates.push(TripleCandidate {
                    subject: s.clone(),
                    predicate: property.clone(),
                    object: o.clone(),
                    base_score: base,
                    existence_boosted: false,
                    nli_probability: 1.0,
                    final_score: base,
                });
            }
        }
        if candidates.len() > config.max_candidates_per_relation {
            out.warnings.push(format!(
                "relation {:?}: {} candidates capped at {}",
                relation.predicate_surface,
                candidates.len(),
                config.max_candidates_per_relation
            ));
            candidates.sort_by(|a, b| by_score(a, b, |c| c.base_score));
            candidates.truncate(config.max_candidates_per_relation);
        }
        out.relations.push(RelationCandidates { relation: relation.clone(), provenance, candidates });
    }
    out
}

/// Multiplies the score by the boost factor when the statement is known.
pub fn apply_existence_boost(candidate: &mut TripleCandidate, store: &dyn FactStore, config: &FusionConfig) {
    let object = match &candidate.object {
        CandidateObject::Entity(c) => StatementObject::Iri(c.record.iri.clone()),
        CandidateObject::Literal(v) => {
            StatementObject::Literal { lexical: v.lexical.clone(), datatype: v.datatype.clone() }
        }
    };
    candidate.existence_boosted = store.contains(&candidate.subject.record.iri, &candidate.predicate.iri, &object);
    candidate.recompute(config);
}

fn labelled(label: &str, description: &str) -> String {
    if description.is_empty() {
        label.to_string()
    } else {
        format!("{label} ({description})")
    }
}

/// `"{subject} ({description}) {predicate} {object} ({description})"`.
pub fn nli_label(candidate: &TripleCandidate) -> String {
    let subject = &candidate.subject.record;
    let object = match &candidate.object {
        CandidateObject::Entity(c) => labelled(&c.record.label, &c.record.description),
        CandidateObject::Literal(v) => v.lexical.clone(),
    };
    format!("{} {} {}", labelled(&subject.label, &subject.description), candidate.predicate.label, object)
}

/// Entailment probabilities of class labels given a text.
pub trait NliBackend: Send + Sync {
    fn id(&self) -> &str;
    fn infer(&self, text: &str, labels: &[String]) -> Result<Vec<f64>, BackendError>;
}

/// Jaccard overlap of the label's and the text's token sets.
#[derive(Debug, Clone, Copy, Default)]
pub struct JaccardNli;

impl JaccardNli {
    pub const ID: &'static str = "jaccard";

    pub fn probability(text: &str, label: &str) -> f64 {
        let a: HashSet<String> = tokens(text).collect();
        let b: HashSet<String> = tokens(label).collect();
        let union = a.union(&b).count();
        if union == 0 {
            0.0
        } else {
            (a.intersection(&b).count() as f64 / union as f64).clamp(0.0, 1.0)
        }
    }
}

impl NliBackend for JaccardNli {
    fn id(&self) -> &str {
        Self::ID
    }

    fn infer(&self, text: &str, labels: &[String]) -> Result<Vec<f64>, BackendError> {
        Ok(labels.iter().map(|l| Self::probability(text, l)).collect())
    }
}

/// One backend call per relation; sets probabilities and final scores. A
/// failing call, or one returning bad probabilities, leaves that relation's
/// probabilities at 1.
pub fn nli_rank(
    text: &str,
    relations: &mut [RelationCandidates],
    backend: &dyn NliBackend,
    config: &FusionConfig,
) -> Vec<String> {
    relations
        .par_iter_mut()
        .filter(|r| !r.candidates.is_empty())
        .filter_map(|r| {
            let labels: Vec<String> = r.candidates.iter().map(nli_label).collect();
            let result = backend.infer(text, &labels).and_then(|p| {
                let ok = p.len() == labels.len() && p.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x));
                if ok {
                    Ok(p)
                } else {
                    Err(BackendError::new(backend.id(), "expected one probability in [0, 1] per label"))
                }
            });
            let (probabilities, warning) = match result {
                Ok(p) => (p, None),
                Err(e) => (
                    vec![1.0; labels.len()],
                    Some(format!("entailment skipped for relation {:?}: {e}", r.relation.predicate_surface)),
                ),
            };
            for (c, p) in r.candidates.iter_mut().zip(probabilities) {
                c.nli_probability = p;
                c.recompute(config);
            }
            warning
        })
        .collect()
}

/// Higher score first, then smaller subject IRI, then smaller object.
fn by_score(a: &TripleCandidate, b: &TripleCandidate, score: impl Fn(&TripleCandidate) -> f64) -> Ordering {
    score(b)
        .total_cmp(&score(a))
        .then_with(|| a.subject.record.iri.cmp(&b.subject.record.iri))
        .then_with(|| a.object_key().cmp(&b.object_key()))
}

/// The best candidate under `score`, with the selection tie-breaks.
pub fn best_by(candidates: &[TripleCandidate], score: impl Fn(&TripleCandidate) -> f64) -> Option<&TripleCandidate> {
    candidates.iter().min_by(|a, b| by_score(a, b, &score))
}

/// Per relation, the candidate with the highest final score.
pub fn select(relations: &[RelationCandidates]) -> Vec<Triple> {
    relations
        .iter()
        .filter_map(|r| best_by(&r.candidates, |c| c.final_score).map(|c| c.to_triple(r.provenance)))
        .collect()
}

/// Selected triples gathered into a deduplicated graph.
pub fn select_graph(text: &str, mentions: Vec<LinkedMention>, relations: &[RelationCandidates]) -> KnowledgeGraph {
    let mut graph = KnowledgeGraph::new(text, mentions);
    for triple in select(relations) {
        graph.insert(triple);
    }
    graph
}

//! Mention recognition, literal handling, candidate retrieval and reranking.

pub mod concepts;
pub mod embed;
pub mod gazetteer;
pub mod literal;
pub mod rerank;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use concepts::ConceptExtractor;
pub use embed::HashedTrigramEmbedder;
pub use gazetteer::{Gazetteer, GazetteerRecognizer};
pub use literal::{classify_mention, parse_literal, LiteralRecognizer, MentionClass};

use crate::backend::BackendError;
use crate::index::{KbIndex, RecordKind, RetrievalConfig};
use crate::model::{LinkedMention, Mention, Resolution};

/// Finds entity mentions in text.
pub trait RecognizerBackend: Send + Sync {
    fn id(&self) -> &str;
    fn recognize(&self, text: &str) -> Result<Vec<Mention>, BackendError>;
}

/// Maps a sentence to a fixed-dimension vector.
pub trait EmbedderBackend: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, sentence: &str) -> Result<Vec<f64>, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    pub retrieval: RetrievalConfig,
    pub rerank: bool,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self { retrieval: RetrievalConfig::default(), rerank: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Discovery {
    /// Sorted by start offset, mutually non-overlapping.
    pub mentions: Vec<LinkedMention>,
    pub warnings: Vec<String>,
}

/// Runs every recognizer and merges their output. A failing backend, or one
/// returning spans that do not match the text, contributes nothing beyond a
/// warning.
pub fn recognize_all(text: &str, backends: &[Arc<dyn RecognizerBackend>]) -> (Vec<Mention>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut per_backend = Vec::with_capacity(backends.len());
    for backend in backends {
        match backend.recognize(text) {
            Ok(mentions) => {
                let (valid, invalid): (Vec<_>, Vec<_>) = mentions.into_iter().partition(|m| m.is_valid_for(text));
                if !invalid.is_empty() {
                    warnings.push(format!(
                        "recognizer {}: dropped {} mention(s) with spans that do not match the text",
                        backend.id(),
                        invalid.len()
                    ));
                }
                per_backend.push(valid);
            }
            Err(e) => {
                warnings.push(e.to_string());
                per_backend.push(Vec::new());
            }
        }
    }
    (merge_mentions(per_backend), warnings)
}

/// Union of the backends' mentions. Identical spans keep the mention of the
/// earliest backend; overlapping spans keep the longer one, then the earlier.
pub fn merge_mentions(per_backend: Vec<Vec<Mention>>) -> Vec<Mention> {
    let mut all: Vec<(usize, Mention)> =
        per_backend.into_iter().enumerate().flat_map(|(rank, ms)| ms.into_iter().map(move |m| (rank, m))).collect();
    all.sort_by(|(ra, a), (rb, b)| {
        b.span.len().cmp(&a.span.len()).then(a.span.start.cmp(&b.span.start)).then(ra.cmp(rb))
    });
    let mut kept: Vec<Mention> = Vec::new();
    for (_, m) in all {
        if !m.span.is_empty() && !kept.iter().any(|k| k.span.overlaps(&m.span)) {
            kept.push(m);
        }
    }
    kept.sort_by_key(|m| m.span);
    kept
}

/// Resolves one mention: literals are parsed, everything else is searched and
/// optionally reranked against its sentence.
pub fn resolve_mention(
    text: &str,
    mention: Mention,
    embedder: &dyn EmbedderBackend,
    index: &KbIndex,
    config: &DiscoveryConfig,
) -> (LinkedMention, Option<String>) {
    if let Some(kind) = classify_mention(&mention).literal_kind() {
        let value = parse_literal(&mention, kind);
        return (LinkedMention { mention, resolution: Resolution::Literal { value } }, None);
    }
    let retrieved = index.search(RecordKind::Entity, &mention.surface, &config.retrieval);
    if retrieved.is_empty() {
        return (LinkedMention { mention, resolution: Resolution::Unlinked }, None);
    }
    let mut warning = None;
    let candidates = if config.rerank {
        let context = rerank::context_sentence(text, mention.span);
        match rerank::rerank(retrieved.clone(), context, embedder) {
            Ok(c) => c,
            Err(e) => {
                warning = Some(format!("rerank skipped for {:?}: {e}", mention.surface));
                rerank::normalize_scores(retrieved)
            }
        }
    } else {
        rerank::normalize_scores(retrieved)
    };
    let selected = mention
        .preferred_iri
        .as_ref()
        .and_then(|iri| candidates.iter().position(|c| &c.record.iri == iri))
        .unwrap_or(0);
    (LinkedMention { mention, resolution: Resolution::Linked { candidates, selected } }, warning)
}

/// Recognizes, classifies and links every mention of `text`.
pub fn discover(
    text: &str,
    recognizers: &[Arc<dyn RecognizerBackend>],
    embedder: &dyn EmbedderBackend,
    index: &KbIndex,
    config: &DiscoveryConfig,
) -> Discovery {
    let (mentions, mut warnings) = recognize_all(text, recognizers);
    let resolved: Vec<_> =
        mentions.into_par_iter().map(|m| resolve_mention(text, m, embedder, index, config)).collect();
    let mut out = Vec::with_capacity(resolved.len());
    for (lm, warning) in resolved {
        warnings.extend(warning);
        out.push(lm);
    }
    Discovery { mentions: out, warnings }
}

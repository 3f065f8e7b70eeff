//! Context reranking of retrieved candidates.
//!
//! Each candidate's new score is its clamped cosine similarity to the
//! mention's sentence, times its retrieval score divided by the best
//! retrieval score of the list.

use super::embed::cosine;
use super::EmbedderBackend;
use crate::backend::BackendError;
use crate::model::{rank_order, KbRecord, ScoredCandidate, Span};

/// `"{label} is a {description}"`, or the bare label without a description.
pub fn descriptive_sentence(record: &KbRecord) -> String {
    let description = record.description.trim();
    if description.is_empty() {
        record.label.clone()
    } else {
        format!("{} is a {}", record.label, description)
    }
}

/// Sentence spans: a boundary is `.`, `!` or `?` followed by whitespace.
/// Surrounding whitespace is excluded from each span.
pub fn sentence_spans(text: &str) -> Vec<Span> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut push = |from: usize, to: usize| {
        let mut s = from;
        let mut e = to;
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if s < e {
            out.push(Span::new(s, e));
        }
    };
    for i in 0..chars.len() {
        if matches!(chars[i], '.' | '!' | '?') && chars.get(i + 1).is_some_and(|c| c.is_whitespace()) {
            push(start, i + 1);
            start = i + 1;
        }
    }
    push(start, chars.len());
    out
}

/// The first sentence containing the start of `span`, or the whole text.
pub fn context_sentence(text: &str, span: Span) -> &str {
    sentence_spans(text).into_iter().find(|s| s.contains(span.start)).and_then(|s| s.slice(text)).unwrap_or(text)
}

fn normalizer(candidates: &[ScoredCandidate]) -> f64 {
    let max = candidates.iter().map(|c| c.score).fold(0.0, f64::max);
    if max > 0.0 {
        max
    } else {
        1.0
    }
}

/// Scales scores into `[0, 1]` by the list maximum, keeping retrieval order.
/// Used when reranking is disabled or the embedder fails.
pub fn normalize_scores(mut candidates: Vec<ScoredCandidate>) -> Vec<ScoredCandidate> {
    let max = normalizer(&candidates);
    for c in &mut candidates {
        c.score /= max;
    }
    candidates.sort_by(rank_order);
    candidates
}

/// Reorders and rescales `candidates`; the candidate set is unchanged.
pub fn rerank(
    candidates: Vec<ScoredCandidate>,
    context: &str,
    embedder: &dyn EmbedderBackend,
) -> Result<Vec<ScoredCandidate>, BackendError> {
    if candidates.is_empty() {
        return Ok(candidates);
    }
    let checked = |v: Vec<f64>| -> Result<Vec<f64>, BackendError> {
        if v.len() != embedder.dim() || v.iter().any(|x| !x.is_finite()) {
            Err(BackendError::new(embedder.id(), "embedding has wrong dimension or non-finite components"))
        } else {
            Ok(v)
        }
    };
    let context_vec = checked(embedder.embed(context)?)?;
    let max = normalizer(&candidates);
    let mut out = Vec::with_capacity(candidates.len());
    for mut c in candidates {
        let v = checked(embedder.embed(&descriptive_sentence(&c.record))?)?;
        let similarity = cosine(&v, &context_vec).clamp(0.0, 1.0);
        c.score = similarity * (c.score / max);
        out.push(c);
    }
    out.sort_by(rank_order);
    Ok(out)
}

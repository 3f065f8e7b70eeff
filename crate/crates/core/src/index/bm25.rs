//! Okapi BM25 over a single text field.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Collection statistics BM25 needs about one field.
pub trait CorpusStats {
    fn doc_count(&self) -> usize;
    fn avg_doc_len(&self) -> f64;
    fn doc_freq(&self, term: &str) -> usize;
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`
pub fn idf(doc_count: usize, doc_freq: usize) -> f64 {
    let n = doc_count as f64;
    let df = doc_freq as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

fn term_weight(tf: f64, doc_len: f64, avg_len: f64, p: Bm25Params) -> f64 {
    let rel_len = if avg_len > 0.0 { doc_len / avg_len } else { 1.0 };
    tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * rel_len))
}

/// BM25 of `query` against `field_text`, both run through the analyzer.
/// Repeated query terms contribute once per occurrence.
pub fn bm25(query: &str, field_text: &str, stats: &impl CorpusStats, params: Bm25Params) -> f64 {
    let query = tokenize(query);
    if query.is_empty() {
        return 0.0;
    }
    let doc = tokenize(field_text);
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for t in &doc {
        *tf.entry(t.as_str()).or_default() += 1;
    }
    let n = stats.doc_count();
    let avg = stats.avg_doc_len();
    query
        .iter()
        .filter_map(|t| tf.get(t.as_str()).map(|&f| (t, f)))
        .map(|(t, f)| idf(n, stats.doc_freq(t)) * term_weight(f as f64, doc.len() as f64, avg, params))
        .sum()
}

/// Inverted index over one field of every record.
#[derive(Debug, Clone, Default)]
pub struct FieldIndex {
    terms: HashMap<String, u32>,
    /// Per term id: `(doc, tf)` sorted by doc.
    postings: Vec<Vec<(u32, u32)>>,
    doc_lens: Vec<u32>,
    total_len: u64,
}

impl FieldIndex {
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut index = Self::default();
        for (doc, text) in docs.into_iter().enumerate() {
            let doc = doc as u32;
            let tokens = tokenize(text);
            index.doc_lens.push(tokens.len() as u32);
            index.total_len += tokens.len() as u64;
            for token in tokens {
                let next = index.postings.len() as u32;
                let id = *index.terms.entry(token).or_insert(next);
                if id == next {
                    index.postings.push(Vec::new());
                }
                let list = &mut index.postings[id as usize];
                match list.last_mut() {
                    Some((d, tf)) if *d == doc => *tf += 1,
                    _ => list.push((doc, 1)),
                }
            }
        }
        index
    }

    pub fn postings(&self, term: &str) -> &[(u32, u32)] {
        self.terms.get(term).map_or(&[], |&id| &self.postings[id as usize])
    }

    pub fn doc_len(&self, doc: u32) -> u32 {
        self.doc_lens[doc as usize]
    }

    /// Adds every document's BM25 contribution for `query` into `acc`.
    pub fn accumulate(&self, query: &[String], params: Bm25Params, acc: &mut HashMap<u32, f64>) {
        let n = self.doc_count();
        let avg = self.avg_doc_len();
        for term in query {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let w = idf(n, list.len());
            for &(doc, tf) in list {
                *acc.entry(doc).or_default() += w * term_weight(tf as f64, self.doc_len(doc) as f64, avg, params);
            }
        }
    }

    /// BM25 of a pre-tokenized query against one document.
    pub fn score_doc(&self, query: &[String], doc: u32, params: Bm25Params) -> f64 {
        let n = self.doc_count();
        let avg = self.avg_doc_len();
        query
            .iter()
            .filter_map(|term| {
                let list = self.postings(term);
                let at = list.binary_search_by_key(&doc, |&(d, _)| d).ok()?;
                Some(idf(n, list.len()) * term_weight(list[at].1 as f64, self.doc_len(doc) as f64, avg, params))
            })
            .sum()
    }
}

impl CorpusStats for FieldIndex {
    fn doc_count(&self) -> usize {
        self.doc_lens.len()
    }

    fn avg_doc_len(&self) -> f64 {
        if self.doc_lens.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.doc_lens.len() as f64
        }
    }

    fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }
}

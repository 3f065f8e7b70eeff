//! Entity and property retrieval.
//!
//! A record's relevance for a mention is the larger of the label BM25 scaled
//! by `alpha` and the search-key BM25; its score multiplies relevance by
//! `log10(commonness + 1)`. Search keeps records scoring at least the
//! threshold, best first, capped at `max_candidates`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{rank_order, Iri, KbRecord, ScoredCandidate};

pub mod bm25;
pub mod dump;
mod persist;
pub mod statements;
pub mod tokenize;

pub use bm25::{bm25, Bm25Params, CorpusStats, FieldIndex};
pub use dump::{DumpRecord, DumpTarget, FilterRule, IngestStats, Namespaces, RejectCounts};
pub use persist::{FORMAT_TAG, FORMAT_VERSION};
pub use statements::{FactStore, Statement, StatementObject, StatementStore};

use dump::{check_rules, expand_datatype};
use tokenize::tokenize;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("index format error: {0}")]
    Format(String),
    #[error("invalid retrieval config: {0}")]
    Config(String),
}

impl IndexError {
    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> Self {
        let context = context.into();
        move |source| Self::Io { context, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Entity,
    Property,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    /// Label-match boost, must exceed 1.
    pub alpha: f64,
    pub max_candidates: usize,
    /// Minimum combined score for entity candidates.
    pub min_score: f64,
    /// Minimum combined score for property candidates.
    pub property_min_score: f64,
    pub k1: f64,
    pub b: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { alpha: 3.0, max_candidates: 20, min_score: 20.0, property_min_score: 20.0, k1: 1.2, b: 0.75 }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), IndexError> {
        let fail = |m: &str| Err(IndexError::Config(m.into()));
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return fail("alpha must be a finite value > 1");
        }
        if self.max_candidates == 0 {
            return fail("max_candidates must be positive");
        }
        if !(self.min_score >= 0.0 && self.property_min_score >= 0.0) {
            return fail("score thresholds must be non-negative");
        }
        if !(self.k1 >= 0.0 && (0.0..=1.0).contains(&self.b)) {
            return fail("bm25 requires k1 >= 0 and 0 <= b <= 1");
        }
        Ok(())
    }

    pub fn bm25(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }

    pub fn threshold(&self, kind: RecordKind) -> f64 {
        match kind {
            RecordKind::Entity => self.min_score,
            RecordKind::Property => self.property_min_score,
        }
    }
}

/// `max(alpha * label_bm25, key_bm25)`
pub fn relevance_from(label_bm25: f64, key_bm25: f64, alpha: f64) -> f64 {
    (alpha * label_bm25).max(key_bm25)
}

/// `relevance * log10(commonness + 1)`
pub fn combined_score(relevance: f64, commonness: u64) -> f64 {
    relevance * ((commonness as f64) + 1.0).log10()
}

/// Records of one kind with inverted indexes over label and search key.
#[derive(Debug, Clone, Default)]
pub struct RecordIndex {
    records: Vec<KbRecord>,
    by_iri: HashMap<Iri, u32>,
    label: FieldIndex,
    key: FieldIndex,
}

impl RecordIndex {
    pub fn new(mut records: Vec<KbRecord>) -> Self {
        records.sort_by(|a, b| a.iri.cmp(&b.iri));
        records.dedup_by(|a, b| a.iri == b.iri);
        let by_iri = records.iter().enumerate().map(|(i, r)| (r.iri.clone(), i as u32)).collect();
        let label = FieldIndex::build(records.iter().map(|r| r.label.as_str()));
        let key = FieldIndex::build(records.iter().map(|r| r.search_key.as_str()));
        Self { records, by_iri, label, key }
    }

    pub fn records(&self) -> &[KbRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, iri: &Iri) -> Option<&KbRecord> {
        self.by_iri.get(iri).map(|&i| &self.records[i as usize])
    }

    pub fn label_field(&self) -> &FieldIndex {
        &self.label
    }

    pub fn key_field(&self) -> &FieldIndex {
        &self.key
    }

    /// `(label BM25, search-key BM25)` of one record.
    pub fn field_scores(&self, mention: &str, iri: &Iri, params: Bm25Params) -> Option<(f64, f64)> {
        let doc = *self.by_iri.get(iri)?;
        let q = tokenize(mention);
        Some((self.label.score_doc(&q, doc, params), self.key.score_doc(&q, doc, params)))
    }

    pub fn relevance(&self, mention: &str, iri: &Iri, config: &RetrievalConfig) -> Option<f64> {
        let (l, k) = self.field_scores(mention, iri, config.bm25())?;
        Some(relevance_from(l, k, config.alpha))
    }

    /// Every record sharing a term with the mention, ranked, without threshold or cap.
    pub fn score_all(&self, mention: &str, config: &RetrievalConfig) -> Vec<ScoredCandidate> {
        let q = tokenize(mention);
        if q.is_empty() {
            return Vec::new();
        }
        let params = config.bm25();
        let mut label = HashMap::new();
        let mut key = HashMap::new();
        self.label.accumulate(&q, params, &mut label);
        // The key contains the label, so key hits cover every label hit.
        self.key.accumulate(&q, params, &mut key);
        let mut out: Vec<ScoredCandidate> = key
            .into_iter()
            .map(|(doc, key_score)| {
                let record = &self.records[doc as usize];
                let relevance = relevance_from(label.get(&doc).copied().unwrap_or(0.0), key_score, config.alpha);
                ScoredCandidate {
                    record: record.clone(),
                    relevance,
                    score: combined_score(relevance, record.commonness),
                }
            })
            .collect();
        out.sort_by(rank_order);
        out
    }

    pub fn search(&self, mention: &str, config: &RetrievalConfig, min_score: f64) -> Vec<ScoredCandidate> {
        let mut out = self.score_all(mention, config);
        out.retain(|c| c.score >= min_score);
        out.truncate(config.max_candidates);
        out
    }
}

/// Entity index, property index and statement store built from the same dumps.
/// Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct KbIndex {
    namespaces: Namespaces,
    entities: RecordIndex,
    properties: RecordIndex,
    statements: StatementStore,
}

impl KbIndex {
    pub fn from_parts(
        namespaces: Namespaces,
        entities: Vec<KbRecord>,
        properties: Vec<KbRecord>,
        statements: StatementStore,
    ) -> Self {
        Self { namespaces, entities: RecordIndex::new(entities), properties: RecordIndex::new(properties), statements }
    }

    pub fn namespaces(&self) -> &Namespaces {
        &self.namespaces
    }

    pub fn records(&self, kind: RecordKind) -> &RecordIndex {
        match kind {
            RecordKind::Entity => &self.entities,
            RecordKind::Property => &self.properties,
        }
    }

    pub fn entities(&self) -> &RecordIndex {
        &self.entities
    }

    pub fn properties(&self) -> &RecordIndex {
        &self.properties
    }

    pub fn statements(&self) -> &StatementStore {
        &self.statements
    }

    pub fn search(&self, kind: RecordKind, mention: &str, config: &RetrievalConfig) -> Vec<ScoredCandidate> {
        self.records(kind).search(mention, config, config.threshold(kind))
    }
}

#[derive(Debug, Clone)]
struct PendingRecord {
    label: String,
    description: String,
    aliases: Vec<String>,
    commonness_override: Option<u64>,
}

/// Accumulates dumps, then computes commonness and freezes a [`KbIndex`].
#[derive(Debug, Default)]
pub struct IndexBuilder {
    namespaces: Namespaces,
    entities: BTreeMap<Iri, PendingRecord>,
    properties: BTreeMap<Iri, PendingRecord>,
    statements: BTreeSet<Statement>,
}

impl IndexBuilder {
    pub fn new(namespaces: Namespaces) -> Self {
        Self { namespaces, ..Self::default() }
    }

    /// Reads one dump. Malformed lines are counted and skipped; I/O errors abort.
    pub fn ingest(&mut self, reader: impl BufRead, kind: RecordKind) -> Result<IngestStats, IndexError> {
        let mut stats = IngestStats::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(IndexError::io(format!("reading dump line {}", n + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            stats.read += 1;
            let record: DumpRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("dump line {}: {e}", n + 1);
                    stats.malformed += 1;
                    continue;
                }
            };
            let iri = match kind {
                RecordKind::Entity => self.namespaces.entity(record.id.trim()),
                RecordKind::Property => self.namespaces.property(record.id.trim()),
            };
            if let Err(rule) = check_rules(&record, &iri) {
                stats.rejected.count(rule);
                continue;
            }
            let target = match kind {
                RecordKind::Entity => &mut self.entities,
                RecordKind::Property => &mut self.properties,
            };
            if target.contains_key(&iri) {
                stats.duplicates += 1;
                continue;
            }
            for edge in &record.outgoing {
                let property = self.namespaces.property(edge.property.trim());
                let object = match &edge.target {
                    DumpTarget::Id(id) => StatementObject::Iri(self.namespaces.entity(id.trim())),
                    DumpTarget::Literal { value, datatype } => StatementObject::Literal {
                        lexical: value.clone(),
                        datatype: expand_datatype(datatype.as_deref()),
                    },
                };
                let object_ok = match &object {
                    StatementObject::Iri(i) => i.is_valid(),
                    StatementObject::Literal { datatype, .. } => datatype.is_valid(),
                };
                if property.is_valid() && object_ok {
                    self.statements.insert(Statement { subject: iri.clone(), property, object });
                }
            }
            target.insert(
                iri,
                PendingRecord {
                    label: record.label,
                    description: record.description,
                    aliases: record.aliases,
                    commonness_override: record.commonness_override,
                },
            );
            stats.kept += 1;
        }
        Ok(stats)
    }

    /// Entity commonness is its in-degree over the kept statements; property
    /// commonness is the number of kept statements using it. Overrides win.
    pub fn build(self) -> KbIndex {
        let mut in_degree: HashMap<&Iri, u64> = HashMap::new();
        let mut usage: HashMap<&Iri, u64> = HashMap::new();
        for s in &self.statements {
            if let StatementObject::Iri(o) = &s.object {
                *in_degree.entry(o).or_default() += 1;
            }
            *usage.entry(&s.property).or_default() += 1;
        }
        let freeze = |map: &BTreeMap<Iri, PendingRecord>, counts: &HashMap<&Iri, u64>| -> Vec<KbRecord> {
            map.iter()
                .map(|(iri, p)| {
                    let commonness = p.commonness_override.unwrap_or_else(|| counts.get(iri).copied().unwrap_or(0));
                    KbRecord::new(iri.clone(), p.label.clone(), p.description.clone(), p.aliases.clone(), commonness)
                })
                .collect()
        };
        let entities = freeze(&self.entities, &in_degree);
        let properties = freeze(&self.properties, &usage);
        KbIndex::from_parts(self.namespaces, entities, properties, self.statements.into_iter().collect())
    }
}

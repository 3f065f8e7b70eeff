//! Per-stage evaluation against gold mentions and triples, macro-averaged
//! over documents.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::best_by;
use crate::index::tokenize::tokenize;
use crate::index::{KbIndex, Namespaces};
use crate::model::{Iri, Node, Resolution, Span, Triple};
use crate::pipeline::{Pipeline, StageOutputs};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reading dataset {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("predictions for {got} documents, dataset has {expected}")]
    Misaligned { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStage {
    Ner,
    EntityRetrieval,
    EntityReranking,
    RelationExtraction,
    RelationLinking,
    KnowledgeFusion,
    Nli,
}

impl EvalStage {
    /// Report row order.
    pub const ALL: [EvalStage; 7] = [
        EvalStage::Ner,
        EvalStage::EntityRetrieval,
        EvalStage::EntityReranking,
        EvalStage::RelationExtraction,
        EvalStage::RelationLinking,
        EvalStage::KnowledgeFusion,
        EvalStage::Nli,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EvalStage::Ner => "NER",
            EvalStage::EntityRetrieval => "Entity Retrieval",
            EvalStage::EntityReranking => "Entity Reranking",
            EvalStage::RelationExtraction => "Relation Extraction",
            EvalStage::RelationLinking => "Relation Linking",
            EvalStage::KnowledgeFusion => "Knowledge Fusion",
            EvalStage::Nli => "NLI",
        }
    }
}

impl fmt::Display for EvalStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Triple objects compare by IRI, or by lexical form for literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EvalObject {
    Iri(Iri),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvalTriple {
    pub subject: Iri,
    pub property: Iri,
    pub object: EvalObject,
}

impl EvalTriple {
    /// `None` for triples with an unlinked node.
    pub fn from_triple(t: &Triple) -> Option<Self> {
        let object = match &t.object {
            Node::Entity(e) => EvalObject::Iri(e.iri.clone()),
            Node::Literal(v) => EvalObject::Literal(v.lexical.clone()),
            Node::Unlinked(_) => return None,
        };
        Some(Self { subject: t.subject.iri()?.clone(), property: t.predicate.iri.clone(), object })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldMention {
    pub span: Span,
    /// Absent for literal or unlinkable mentions; they count for NER only.
    pub iri: Option<Iri>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub doc_id: String,
    pub text: String,
    pub gold_mentions: Vec<GoldMention>,
    pub gold_triples: Vec<EvalTriple>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawRecord {
    doc_id: String,
    text: String,
    #[serde(default)]
    mentions: Vec<RawMention>,
    #[serde(default)]
    triples: Vec<RawTriple>,
}

#[derive(Debug, Deserialize)]
struct RawMention {
    start: usize,
    end: usize,
    #[serde(default)]
    iri: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawTriple {
    s: String,
    p: String,
    o: String,
    #[serde(default)]
    literal: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<EvalRecord>,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

fn convert(raw: RawRecord, ns: &Namespaces) -> Result<EvalRecord, String> {
    let checked = |iri: Iri| if iri.is_valid() { Ok(iri) } else { Err(format!("invalid IRI {iri}")) };
    let mut gold_mentions = Vec::with_capacity(raw.mentions.len());
    for m in raw.mentions {
        let span = Span::new(m.start, m.end);
        span.check(&raw.text).map_err(|e| e.to_string())?;
        let iri = m.iri.map(|i| checked(ns.entity(i.trim()))).transpose()?;
        gold_mentions.push(GoldMention { span, iri });
    }
    let mut gold_triples = Vec::with_capacity(raw.triples.len());
    for t in raw.triples {
        let object =
            if t.literal { EvalObject::Literal(t.o) } else { EvalObject::Iri(checked(ns.entity(t.o.trim()))?) };
        gold_triples.push(EvalTriple {
            subject: checked(ns.entity(t.s.trim()))?,
            property: checked(ns.property(t.p.trim()))?,
            object,
        });
    }
    Ok(EvalRecord { doc_id: raw.doc_id, text: raw.text, gold_mentions, gold_triples })
}

/// Reads line-delimited records; malformed ones are skipped with a warning.
pub fn read_dataset(reader: impl BufRead, ns: &Namespaces) -> Result<Dataset, std::io::Error> {
    let mut out = Dataset::default();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed =
            serde_json::from_str::<RawRecord>(&line).map_err(|e| e.to_string()).and_then(|raw| convert(raw, ns));
        match parsed {
            Ok(r) => out.records.push(r),
            Err(e) => {
                let warning = format!("dataset line {}: {e}", n + 1);
                log::warn!("{warning}");
                out.warnings.push(warning);
                out.skipped += 1;
            }
        }
    }
    Ok(out)
}

pub fn load_dataset(path: &Path, ns: &Namespaces) -> Result<Dataset, EvalError> {
    let io = |source| EvalError::Io { path: path.display().to_string(), source };
    let file = std::fs::File::open(path).map_err(io)?;
    read_dataset(std::io::BufReader::new(file), ns).map_err(io)
}

/// Lowercased tokens joined by single spaces.
pub fn normalize_surface(s: &str) -> String {
    tokenize(s).join(" ")
}

/// One document's output, reduced to the sets each stage is scored on.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predictions {
    pub ner: BTreeSet<Span>,
    /// Every retrieved candidate per mention.
    pub retrieval: BTreeSet<(Span, Iri)>,
    /// The top candidate per mention.
    pub reranking: BTreeSet<(Span, Iri)>,
    pub relation_surfaces: BTreeSet<String>,
    pub relation_properties: BTreeSet<Iri>,
    /// Per relation, the best candidate by base score.
    pub fusion: BTreeSet<EvalTriple>,
    /// The constructed graph.
    pub nli: BTreeSet<EvalTriple>,
}

impl Predictions {
    pub fn from_outputs(out: &StageOutputs) -> Self {
        let mut p = Predictions::default();
        for lm in &out.discovery.mentions {
            let span = lm.mention.span;
            p.ner.insert(span);
            if let Resolution::Linked { candidates, .. } = &lm.resolution {
                p.retrieval.extend(candidates.iter().map(|c| (span, c.record.iri.clone())));
                if let Some(top) = candidates.first() {
                    p.reranking.insert((span, top.record.iri.clone()));
                }
            }
        }
        for r in &out.relations.relations {
            p.relation_surfaces.insert(normalize_surface(&r.predicate_surface));
            if let Some(prop) = &r.linked_property {
                p.relation_properties.insert(prop.iri.clone());
            }
        }
        for r in &out.fused {
            if let Some(c) = best_by(&r.candidates, |c| c.base_score) {
                p.fusion.extend(EvalTriple::from_triple(&c.to_triple(r.provenance)));
            }
        }
        p.nli = out.graph.triples().iter().filter_map(EvalTriple::from_triple).collect();
        p
    }

    /// The gold standard expressed as predictions; scores 1 on every stage.
    pub fn from_gold(gold: &GoldSets) -> Self {
        Self {
            ner: gold.ner.clone(),
            retrieval: gold.links.clone(),
            reranking: gold.links.clone(),
            relation_surfaces: gold.relation_surfaces.clone(),
            relation_properties: gold.relation_properties.clone(),
            fusion: gold.triples.clone(),
            nli: gold.triples.clone(),
        }
    }
}

/// Gold sets of one record, in the shapes [`Predictions`] are compared to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldSets {
    pub ner: BTreeSet<Span>,
    pub links: BTreeSet<(Span, Iri)>,
    /// Normalized labels of the gold properties; the IRI's local name when
    /// the property is not indexed.
    pub relation_surfaces: BTreeSet<String>,
    pub relation_properties: BTreeSet<Iri>,
    pub triples: BTreeSet<EvalTriple>,
}

impl GoldSets {
    pub fn new(record: &EvalRecord, index: &KbIndex) -> Self {
        let relation_properties: BTreeSet<Iri> = record.gold_triples.iter().map(|t| t.property.clone()).collect();
        let relation_surfaces = relation_properties
            .iter()
            .map(|p| match index.properties().get(p) {
                Some(r) => normalize_surface(&r.label),
                None => normalize_surface(p.local_name()),
            })
            .collect();
        Self {
            ner: record.gold_mentions.iter().map(|m| m.span).collect(),
            links: record.gold_mentions.iter().filter_map(|m| Some((m.span, m.iri.clone()?))).collect(),
            relation_surfaces,
            relation_properties,
            triples: record.gold_triples.iter().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Set comparison: hits, spurious predictions, missed gold items.
pub fn stage_hits<T: Ord>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> Counts {
    let tp = predicted.intersection(gold).count();
    Counts { tp, fp: predicted.len() - tp, fn_: gold.len() - tp }
}

pub fn stage_counts(stage: EvalStage, p: &Predictions, g: &GoldSets) -> Counts {
    match stage {
        EvalStage::Ner => stage_hits(&p.ner, &g.ner),
        EvalStage::EntityRetrieval => stage_hits(&p.retrieval, &g.links),
        EvalStage::EntityReranking => stage_hits(&p.reranking, &g.links),
        EvalStage::RelationExtraction => stage_hits(&p.relation_surfaces, &g.relation_surfaces),
        EvalStage::RelationLinking => stage_hits(&p.relation_properties, &g.relation_properties),
        EvalStage::KnowledgeFusion => stage_hits(&p.fusion, &g.triples),
        EvalStage::Nli => stage_hits(&p.nli, &g.triples),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Both sets empty scores 1; an empty denominator otherwise gives 0.
    pub fn from_counts(c: Counts) -> Self {
        if c.tp + c.fp + c.fn_ == 0 {
            return Self { precision: 1.0, recall: 1.0, f1: 1.0 };
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        Self { precision, recall, f1: f1(precision, recall) }
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Mean of the per-document precision, recall and F1.
pub fn macro_prf(per_doc: &[Counts]) -> Result<Prf, EvalError> {
    if per_doc.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let n = per_doc.len() as f64;
    let sum = per_doc.iter().map(|c| Prf::from_counts(*c)).fold(Prf::default(), |a, b| Prf {
        precision: a.precision + b.precision,
        recall: a.recall + b.recall,
        f1: a.f1 + b.f1,
    });
    Ok(Prf { precision: sum.precision / n, recall: sum.recall / n, f1: sum.f1 / n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub stage: EvalStage,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentResult {
    pub doc_id: String,
    pub counts: Vec<(EvalStage, Counts)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub documents: usize,
    pub stages: Vec<StageMetrics>,
    pub per_document: Vec<DocumentResult>,
}

impl EvalReport {
    pub fn stage(&self, stage: EvalStage) -> Option<&StageMetrics> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    /// Aligned text table, one row per stage.
    pub fn render_table(&self) -> String {
        let width = EvalStage::ALL.iter().map(|s| s.label().len()).max().unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>6}  {:>6}", "Component", "Precision", "Recall", "F1");
        for s in &self.stages {
            let _ =
                writeln!(out, "{:<width$}  {:>9.3}  {:>6.3}  {:>6.3}", s.stage.label(), s.precision, s.recall, s.f1);
        }
        out
    }
}

/// Scores aligned predictions against the dataset.
pub fn evaluate(
    records: &[EvalRecord],
    predictions: &[Predictions],
    failures: &[Option<String>],
    index: &KbIndex,
) -> Result<EvalReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if predictions.len() != records.len() {
        return Err(EvalError::Misaligned { expected: records.len(), got: predictions.len() });
    }
    let per_document: Vec<DocumentResult> = records
        .iter()
        .zip(predictions)
        .enumerate()
        .map(|(i, (r, p))| {
            let gold = GoldSets::new(r, index);
            DocumentResult {
                doc_id: r.doc_id.clone(),
                counts: EvalStage::ALL.iter().map(|&s| (s, stage_counts(s, p, &gold))).collect(),
                failure: failures.get(i).cloned().flatten(),
            }
        })
        .collect();
    let mut stages = Vec::with_capacity(EvalStage::ALL.len());
    for (k, &stage) in EvalStage::ALL.iter().enumerate() {
        let counts: Vec<Counts> = per_document.iter().map(|d| d.counts[k].1).collect();
        let prf = macro_prf(&counts)?;
        stages.push(StageMetrics { stage, precision: prf.precision, recall: prf.recall, f1: prf.f1 });
    }
    Ok(EvalReport { documents: records.len(), stages, per_document })
}

/// Runs the pipeline on every record. A record whose run fails is scored as
/// empty predictions on every stage.
pub fn run_evaluation(records: &[EvalRecord], pipeline: &Pipeline) -> Result<EvalReport, EvalError> {
    let results: Vec<(Predictions, Option<String>)> = records
        .par_iter()
        .map(|r| match pipeline.run_stages(&r.text) {
            Ok(out) => (Predictions::from_outputs(&out), None),
            Err(e) => {
                log::error!("document {}: {e}", r.doc_id);
                (Predictions::default(), Some(e.to_string()))
            }
        })
        .collect();
    let (predictions, failures): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    evaluate(records, &predictions, &failures, pipeline.index())
}

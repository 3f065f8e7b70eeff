//! End-to-end construction: entity discovery and relation extraction run as
//! two concurrent tasks, then fusion, boosting, entailment and selection.

use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discovery::{
    discover, Discovery, DiscoveryConfig, EmbedderBackend, Gazetteer, GazetteerRecognizer, HashedTrigramEmbedder,
    LiteralRecognizer, RecognizerBackend,
};
use crate::fusion::{
    apply_existence_boost, fuse, nli_rank, select_graph, FusionConfig, JaccardNli, NliBackend, RelationCandidates,
};
use crate::index::{FactStore, KbIndex, StatementObject};
use crate::model::{Iri, KnowledgeGraph};
use crate::relation::{extract_and_link, ExtractorBackend, PatternExtractor, PatternTable, RelationExtraction};

impl FactStore for KbIndex {
    fn contains(&self, subject: &Iri, property: &Iri, object: &StatementObject) -> bool {
        self.statements().contains(subject, property, object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Discovery,
    Relations,
    Fusion,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Discovery => "entity discovery",
            Stage::Relations => "relation extraction",
            Stage::Fusion => "knowledge fusion",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{stage} failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub discovery: DiscoveryConfig,
    pub fusion: FusionConfig,
}

#[derive(Clone)]
pub struct Backends {
    /// In priority order for merging identical spans.
    pub recognizers: Vec<Arc<dyn RecognizerBackend>>,
    pub embedder: Arc<dyn EmbedderBackend>,
    pub extractor: Arc<dyn ExtractorBackend>,
    pub nli: Arc<dyn NliBackend>,
}

impl Backends {
    /// Gazetteer and literal recognizers, hashed-trigram embedder, pattern
    /// extractor over the same recognizers, and token-overlap entailment.
    pub fn reference(gazetteer: Gazetteer, patterns: PatternTable) -> Self {
        let recognizers: Vec<Arc<dyn RecognizerBackend>> =
            vec![Arc::new(GazetteerRecognizer::new(gazetteer)), Arc::new(LiteralRecognizer)];
        Self {
            extractor: Arc::new(PatternExtractor::new(recognizers.clone(), patterns)),
            recognizers,
            embedder: Arc::new(HashedTrigramEmbedder::default()),
            nli: Arc::new(JaccardNli),
        }
    }
}

/// Everything the pipeline produced for one text.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutputs {
    pub discovery: Discovery,
    pub relations: RelationExtraction,
    /// Candidates after boosting and entailment scoring.
    pub fused: Vec<RelationCandidates>,
    pub graph: KnowledgeGraph,
    pub warnings: Vec<String>,
}

pub struct Pipeline {
    index: Arc<KbIndex>,
    backends: Backends,
    facts: Option<Arc<dyn FactStore>>,
    config: PipelineConfig,
}

fn guarded<T>(stage: Stage, f: impl FnOnce() -> T) -> Result<T, PipelineError> {
    panic::catch_unwind(AssertUnwindSafe(f)).map_err(|payload| {
        let message = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panicked".into());
        PipelineError { stage, message }
    })
}

impl Pipeline {
    pub fn new(index: Arc<KbIndex>, backends: Backends, config: PipelineConfig) -> Self {
        Self { index, backends, facts: None, config }
    }

    /// Checks existence against `facts` instead of the index's statements.
    pub fn with_fact_store(mut self, facts: Arc<dyn FactStore>) -> Self {
        self.facts = Some(facts);
        self
    }

    pub fn index(&self) -> &KbIndex {
        &self.index
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn run_stages(&self, text: &str) -> Result<StageOutputs, PipelineError> {
        let (discovery, relations) = std::thread::scope(|scope| {
            let relations = scope.spawn(|| {
                guarded(Stage::Relations, || {
                    extract_and_link(
                        text,
                        self.backends.extractor.as_ref(),
                        &self.index,
                        &self.config.discovery.retrieval,
                    )
                })
            });
            let discovery = guarded(Stage::Discovery, || {
                discover(
                    text,
                    &self.backends.recognizers,
                    self.backends.embedder.as_ref(),
                    &self.index,
                    &self.config.discovery,
                )
            });
            let relations = relations.join().unwrap_or_else(|_| {
                Err(PipelineError { stage: Stage::Relations, message: "worker thread panicked".into() })
            });
            (discovery, relations)
        });
        let (discovery, relations) = (discovery?, relations?);
        let fusion = &self.config.fusion;
        let facts: &dyn FactStore = match &self.facts {
            Some(f) => f.as_ref(),
            None => self.index.as_ref(),
        };
        let (fused, graph, fusion_warnings) = guarded(Stage::Fusion, || {
            let mut fused = fuse(&discovery.mentions, &relations.relations, fusion);
            for r in &mut fused.relations {
                for c in &mut r.candidates {
                    apply_existence_boost(c, facts, fusion);
                }
            }
            fused.warnings.extend(nli_rank(text, &mut fused.relations, self.backends.nli.as_ref(), fusion));
            let graph = select_graph(text, discovery.mentions.clone(), &fused.relations);
            (fused.relations, graph, fused.warnings)
        })?;
        let warnings: Vec<String> =
            discovery.warnings.iter().chain(&relations.warnings).chain(&fusion_warnings).cloned().collect();
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(StageOutputs { discovery, relations, fused, graph, warnings })
    }

    pub fn construct(&self, text: &str) -> Result<KnowledgeGraph, PipelineError> {
        self.run_stages(text).map(|out| out.graph)
    }
}

//! Wiring a [`Pipeline`] from configuration.

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use kgforge_core::backend::BackendError;
use kgforge_core::discovery::gazetteer::GazetteerError;
use kgforge_core::discovery::{
    EmbedderBackend, Gazetteer, GazetteerRecognizer, HashedTrigramEmbedder, LiteralRecognizer, RecognizerBackend,
};
use kgforge_core::fusion::{JaccardNli, NliBackend};
use kgforge_core::index::{IndexError, KbIndex};
use kgforge_core::pipeline::{Backends, Pipeline};
use kgforge_core::relation::{ExtractorBackend, PatternError, PatternExtractor, PatternTable};

use crate::config::{AppConfig, BackendChoice, ConfigError};
use crate::remote::{RemoteEmbedder, RemoteExtractor, RemoteNli, RemoteRecognizer};

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("loading index: {0}")]
    Index(#[from] IndexError),
    #[error(transparent)]
    Gazetteer(#[from] GazetteerError),
    #[error(transparent)]
    Patterns(#[from] PatternError),
    #[error("connecting backend: {0}")]
    Backend(#[from] BackendError),
}

pub fn build_backends(config: &AppConfig) -> Result<Backends, SetupError> {
    let recognizers: Vec<Arc<dyn RecognizerBackend>> = match &config.backends.recognizer {
        BackendChoice::Reference => {
            let gazetteer = Gazetteer::load(&config.gazetteer_path())?;
            vec![Arc::new(GazetteerRecognizer::new(gazetteer)), Arc::new(LiteralRecognizer)]
        }
        BackendChoice::Remote(url) => vec![Arc::new(RemoteRecognizer::new(url))],
    };
    let extractor: Arc<dyn ExtractorBackend> = match &config.backends.extractor {
        BackendChoice::Reference => {
            let patterns = match &config.patterns {
                Some(p) => PatternTable::load(p)?,
                None => PatternTable::default(),
            };
            Arc::new(PatternExtractor::new(recognizers.clone(), patterns))
        }
        BackendChoice::Remote(url) => Arc::new(RemoteExtractor::new(url)),
    };
    let embedder: Arc<dyn EmbedderBackend> = match &config.backends.embedder {
        BackendChoice::Reference => Arc::new(HashedTrigramEmbedder::default()),
        BackendChoice::Remote(url) => Arc::new(RemoteEmbedder::connect(url)?),
    };
    let nli: Arc<dyn NliBackend> = match &config.backends.nli {
        BackendChoice::Reference => Arc::new(JaccardNli),
        BackendChoice::Remote(url) => Arc::new(RemoteNli::new(url)),
    };
    Ok(Backends { recognizers, embedder, extractor, nli })
}

/// Validates the configuration, loads the index and connects the backends.
pub fn build_pipeline(config: &AppConfig) -> Result<Pipeline, SetupError> {
    config.validate()?;
    let index = Arc::new(KbIndex::load(&config.index_dir)?);
    Ok(Pipeline::new(index, build_backends(config)?, config.pipeline_config()))
}

/// A config for the reference backends over an index directory, as used by
/// the batch commands.
pub fn offline_config(index_dir: &Path, gazetteer: Option<&Path>, patterns: Option<&Path>) -> AppConfig {
    AppConfig {
        index_dir: index_dir.to_path_buf(),
        gazetteer: gazetteer.map(Path::to_path_buf),
        patterns: patterns.map(Path::to_path_buf),
        ..Default::default()
    }
}

//! Service configuration: a TOML file overlaid with `KGFORGE_*` variables.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use kgforge_core::discovery::DiscoveryConfig;
use kgforge_core::fusion::FusionConfig;
use kgforge_core::index::RetrievalConfig;
use kgforge_core::pipeline::PipelineConfig;

pub const ENV_PREFIX: &str = "KGFORGE_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{key}: {message}")]
    Env { key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Where a model backend comes from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BackendChoice {
    #[default]
    Reference,
    Remote(String),
}

impl FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "reference" {
            Ok(Self::Reference)
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(Self::Remote(s.to_string()))
        } else {
            Err(format!("expected \"reference\" or an http(s) URL, got {s:?}"))
        }
    }
}

impl TryFrom<String> for BackendChoice {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<BackendChoice> for String {
    fn from(c: BackendChoice) -> Self {
        match c {
            BackendChoice::Reference => "reference".into(),
            BackendChoice::Remote(url) => url,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSelection {
    pub recognizer: BackendChoice,
    pub embedder: BackendChoice,
    pub extractor: BackendChoice,
    pub nli: BackendChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    /// Directory written by `kgforge index build`.
    pub index_dir: PathBuf,
    /// Gazetteer for the reference recognizer; defaults to `<index_dir>/gazetteer.tsv`.
    pub gazetteer: Option<PathBuf>,
    /// Pattern table for the reference extractor; built-in patterns when absent.
    pub patterns: Option<PathBuf>,
    pub backends: BackendSelection,
    pub retrieval: RetrievalConfig,
    pub fusion: FusionConfig,
    pub rerank: bool,
    pub listen: SocketAddr,
    pub session_dir: PathBuf,
    /// Longest accepted construction input, in characters.
    pub max_text_len: usize,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            index_dir: PathBuf::from("index"),
            gazetteer: None,
            patterns: None,
            backends: BackendSelection::default(),
            retrieval: RetrievalConfig::default(),
            fusion: FusionConfig::default(),
            rerank: true,
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            session_dir: PathBuf::from("sessions"),
            max_text_len: 100_000,
        }
    }
}

fn parse_env<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::Env { key: key.into(), message: e.to_string() })
}

impl AppConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.into(), message: e.to_string() })
    }

    /// Reads `path`, applies the process environment and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut config = Self::from_toml(&text, &path.display().to_string())?;
        config.resolve_relative_to(path.parent().unwrap_or(Path::new(".")));
        config.apply_env(std::env::vars())?;
        config.validate()?;
        Ok(config)
    }

    /// Relative paths in a config file are taken relative to that file.
    fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.index_dir);
        fix(&mut self.session_dir);
        self.gazetteer.as_mut().map(fix);
        self.patterns.as_mut().map(fix);
    }

    /// Overrides fields from `KGFORGE_*` variables; other variables are ignored.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else { continue };
            let k = key.as_str();
            match name {
                "INDEX_DIR" => self.index_dir = value.into(),
                "GAZETTEER" => self.gazetteer = Some(value.into()),
                "PATTERNS" => self.patterns = Some(value.into()),
                "SESSION_DIR" => self.session_dir = value.into(),
                "LISTEN" => self.listen = parse_env(k, &value)?,
                "MAX_TEXT_LEN" => self.max_text_len = parse_env(k, &value)?,
                "RERANK" => self.rerank = parse_env(k, &value)?,
                "RECOGNIZER" => self.backends.recognizer = parse_env(k, &value)?,
                "EMBEDDER" => self.backends.embedder = parse_env(k, &value)?,
                "EXTRACTOR" => self.backends.extractor = parse_env(k, &value)?,
                "NLI" => self.backends.nli = parse_env(k, &value)?,
                "ALPHA" => self.retrieval.alpha = parse_env(k, &value)?,
                "MAX_CANDIDATES" => self.retrieval.max_candidates = parse_env(k, &value)?,
                "MIN_SCORE" => self.retrieval.min_score = parse_env(k, &value)?,
                "PROPERTY_MIN_SCORE" => self.retrieval.property_min_score = parse_env(k, &value)?,
                "BOOST_FACTOR" => self.fusion.boost_factor = parse_env(k, &value)?,
                _ => log::warn!("ignoring unknown setting {key}"),
            }
        }
        Ok(())
    }

    pub fn gazetteer_path(&self) -> PathBuf {
        self.gazetteer.clone().unwrap_or_else(|| self.index_dir.join("gazetteer.tsv"))
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            discovery: DiscoveryConfig { retrieval: self.retrieval, rerank: self.rerank },
            fusion: self.fusion.clone(),
        }
    }

    /// Numeric settings are in range and every referenced input path exists.
    /// The session directory is created on demand and need not exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.retrieval.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.fusion.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.max_text_len == 0 {
            return Err(ConfigError::Invalid("max_text_len must be positive".into()));
        }
        let must_exist = |what: &str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{what} {} does not exist", p.display())))
            }
        };
        must_exist("index_dir", &self.index_dir)?;
        if self.backends.recognizer == BackendChoice::Reference {
            must_exist("gazetteer", &self.gazetteer_path())?;
        }
        if let Some(p) = &self.patterns {
            must_exist("patterns", p)?;
        }
        if self.session_dir.exists() && !self.session_dir.is_dir() {
            return Err(ConfigError::Invalid(format!("session_dir {} is not a directory", self.session_dir.display())));
        }
        Ok(())
    }
}

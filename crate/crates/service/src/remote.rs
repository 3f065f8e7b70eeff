//! HTTP/JSON clients for model backends running as separate services.
//!
//! Each backend POSTs one JSON object and expects one JSON object back:
//!
//! | backend    | request             | response                                                      |
//! |------------|---------------------|---------------------------------------------------------------|
//! | recognizer | `{text}`            | `{mentions: [{start, end, type, iri?}]}`                      |
//! | embedder   | `{sentence}`        | `{vector: [f64]}`                                             |
//! | extractor  | `{text}`            | `{relations: [{subject: {start, end}, object: {start, end}, predicate}]}` |
//! | nli        | `{text, labels}`    | `{probabilities: [f64]}`                                      |
//!
//! Offsets are character offsets into `text`.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use ureq::Agent;

use kgforge_core::backend::BackendError;
use kgforge_core::discovery::{EmbedderBackend, RecognizerBackend};
use kgforge_core::fusion::NliBackend;
use kgforge_core::model::{EntityType, Iri, Mention, Span};
use kgforge_core::relation::{ExtractedRelation, ExtractorBackend};

const TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Clone)]
struct Endpoint {
    id: String,
    url: String,
    agent: Agent,
}

impl Endpoint {
    fn new(id: &str, url: &str) -> Self {
        let agent: Agent = Agent::config_builder().timeout_global(Some(TIMEOUT)).build().into();
        Self { id: format!("{id}@{url}"), url: url.to_string(), agent }
    }

    fn call<T: DeserializeOwned>(&self, body: serde_json::Value) -> Result<T, BackendError> {
        let fail = |e: ureq::Error| BackendError::new(&self.id, e.to_string());
        self.agent.post(&self.url).send_json(&body).map_err(fail)?.body_mut().read_json::<T>().map_err(fail)
    }
}

#[derive(Deserialize)]
struct WireMention {
    start: usize,
    end: usize,
    #[serde(rename = "type")]
    etype: EntityType,
    #[serde(default)]
    iri: Option<String>,
}

#[derive(Deserialize)]
struct MentionsResponse {
    mentions: Vec<WireMention>,
}

pub struct RemoteRecognizer(Endpoint);

impl RemoteRecognizer {
    pub fn new(url: &str) -> Self {
        Self(Endpoint::new("remote-recognizer", url))
    }
}

impl RecognizerBackend for RemoteRecognizer {
    fn id(&self) -> &str {
        &self.0.id
    }

    fn recognize(&self, text: &str) -> Result<Vec<Mention>, BackendError> {
        let resp: MentionsResponse = self.0.call(json!({ "text": text }))?;
        Ok(resp
            .mentions
            .into_iter()
            .map(|m| {
                let span = Span::new(m.start, m.end);
                // Out-of-range spans keep an empty surface and are dropped downstream.
                Mention {
                    span,
                    surface: span.slice(text).unwrap_or_default().to_string(),
                    etype: m.etype,
                    source: self.0.id.clone(),
                    preferred_iri: m.iri.map(Iri::new_unchecked).filter(Iri::is_valid),
                }
            })
            .collect())
    }
}

#[derive(Deserialize)]
struct VectorResponse {
    vector: Vec<f64>,
}

pub struct RemoteEmbedder {
    endpoint: Endpoint,
    dim: usize,
}

impl RemoteEmbedder {
    /// Embeds a probe sentence to learn the vector dimension.
    pub fn connect(url: &str) -> Result<Self, BackendError> {
        let endpoint = Endpoint::new("remote-embedder", url);
        let probe: VectorResponse = endpoint.call(json!({ "sentence": "probe" }))?;
        if probe.vector.is_empty() {
            return Err(BackendError::new(&endpoint.id, "empty embedding"));
        }
        Ok(Self { dim: probe.vector.len(), endpoint })
    }
}

impl EmbedderBackend for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.endpoint.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, sentence: &str) -> Result<Vec<f64>, BackendError> {
        Ok(self.endpoint.call::<VectorResponse>(json!({ "sentence": sentence }))?.vector)
    }
}

#[derive(Serialize, Deserialize)]
struct WireSpan {
    start: usize,
    end: usize,
}

#[derive(Deserialize)]
struct WireRelation {
    subject: WireSpan,
    object: WireSpan,
    predicate: String,
}

#[derive(Deserialize)]
struct RelationsResponse {
    relations: Vec<WireRelation>,
}

pub struct RemoteExtractor(Endpoint);

impl RemoteExtractor {
    pub fn new(url: &str) -> Self {
        Self(Endpoint::new("remote-extractor", url))
    }
}

impl ExtractorBackend for RemoteExtractor {
    fn id(&self) -> &str {
        &self.0.id
    }

    fn extract(&self, text: &str) -> Result<Vec<ExtractedRelation>, BackendError> {
        let resp: RelationsResponse = self.0.call(json!({ "text": text }))?;
        Ok(resp
            .relations
            .into_iter()
            .map(|r| ExtractedRelation {
                subject: Span::new(r.subject.start, r.subject.end),
                object: Span::new(r.object.start, r.object.end),
                predicate_surface: r.predicate,
                linked_property: None,
            })
            .collect())
    }
}

#[derive(Deserialize)]
struct ProbabilitiesResponse {
    probabilities: Vec<f64>,
}

pub struct RemoteNli(Endpoint);

impl RemoteNli {
    pub fn new(url: &str) -> Self {
        Self(Endpoint::new("remote-nli", url))
    }
}

impl NliBackend for RemoteNli {
    fn id(&self) -> &str {
        &self.0.id
    }

    fn infer(&self, text: &str, labels: &[String]) -> Result<Vec<f64>, BackendError> {
        Ok(self.0.call::<ProbabilitiesResponse>(json!({ "text": text, "labels": labels }))?.probabilities)
    }
}

//! JSON API over HTTP.
//!
//! | method | path                          | body                    |
//! |--------|-------------------------------|-------------------------|
//! | POST   | `/api/construct`              | `{text}`                |
//! | GET    | `/api/entities?q=`            |                         |
//! | GET    | `/api/properties?q=`          |                         |
//! | GET    | `/api/graph/{id}`             |                         |
//! | PUT    | `/api/graph/{id}`             | `{revision, edit}`      |
//! | GET    | `/api/graph/{id}/ntriples`    |                         |

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use kgforge_core::index::RecordKind;
use kgforge_core::model::{char_len, to_ntriples, KnowledgeGraph, LinkedMention, Node, Resolution, ScoredCandidate};
use kgforge_core::pipeline::Pipeline;

use crate::edit::{apply_edit, Edit};
use crate::session::{GraphSession, SessionStore, StoreError, UpdateError};

#[derive(Clone)]
pub struct AppState {
    pub pipeline: Arc<Pipeline>,
    pub store: Arc<SessionStore>,
    pub max_text_len: usize,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    stage: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), stage: None }
    }

    fn internal(message: impl ToString) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}", self.message);
        }
        let mut body = json!({ "error": self.message });
        if let Some(stage) = self.stage {
            body["stage"] = stage.into();
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, e.to_string()),
            StoreError::Stale { .. } => Self::new(StatusCode::CONFLICT, e.to_string()),
            StoreError::Io { .. } | StoreError::Corrupt { .. } => Self::internal(e),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidateView {
    pub iri: String,
    pub label: String,
    pub description: String,
    pub score: f64,
}

impl From<&ScoredCandidate> for CandidateView {
    fn from(c: &ScoredCandidate) -> Self {
        Self {
            iri: c.record.iri.to_string(),
            label: c.record.label.clone(),
            description: c.record.description.clone(),
            score: c.score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeView {
    /// Shared by every mention and triple end standing for this node.
    pub id: String,
    /// `entity`, `unlinked` or `literal`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iri: Option<String>,
    pub label: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datatype: Option<String>,
}

/// Stable view id of a node; unlinked entities are keyed by their anchor span.
pub fn node_id(node: &Node) -> String {
    match node {
        Node::Entity(e) => e.iri.to_string(),
        Node::Unlinked(b) => match b.anchor {
            Some(span) => format!("_:span-{}-{}", span.start, span.end),
            None => format!("_:{}", b.label),
        },
        Node::Literal(l) => format!("\"{}\"^^{}", l.lexical, l.datatype),
    }
}

impl From<&Node> for NodeView {
    fn from(node: &Node) -> Self {
        let (kind, iri, description, datatype) = match node {
            Node::Entity(e) => ("entity", Some(e.iri.to_string()), e.description.clone(), None),
            Node::Unlinked(_) => ("unlinked", None, String::new(), None),
            Node::Literal(l) => ("literal", None, String::new(), Some(l.datatype.to_string())),
        };
        Self { id: node_id(node), kind: kind.into(), iri, label: node.label().to_string(), description, datatype }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpanView {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PropertyView {
    pub iri: String,
    pub label: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TripleView {
    /// Position used by `delete-relation`.
    pub index: usize,
    pub subject: String,
    pub predicate: PropertyView,
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_span: Option<SpanView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_span: Option<SpanView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphView {
    pub source_text: String,
    pub nodes: Vec<NodeView>,
    pub triples: Vec<TripleView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MentionView {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    #[serde(rename = "type")]
    pub etype: String,
    /// `linked`, `literal` or `unlinked`.
    pub status: String,
    pub node_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<usize>,
    pub candidates: Vec<CandidateView>,
}

impl From<&LinkedMention> for MentionView {
    fn from(m: &LinkedMention) -> Self {
        let (status, selected) = match &m.resolution {
            Resolution::Linked { selected, .. } => ("linked", Some(*selected)),
            Resolution::Literal { .. } => ("literal", None),
            Resolution::Unlinked => ("unlinked", None),
        };
        Self {
            start: m.mention.span.start,
            end: m.mention.span.end,
            surface: m.mention.surface.clone(),
            etype: m.mention.etype.as_str().into(),
            status: status.into(),
            node_id: node_id(&m.node()),
            selected,
            candidates: m.candidates().iter().map(CandidateView::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionPayload {
    pub session_id: String,
    pub revision: u64,
    pub graph: GraphView,
    pub mentions: Vec<MentionView>,
}

pub fn graph_view(graph: &KnowledgeGraph) -> GraphView {
    let mut nodes: Vec<NodeView> = Vec::new();
    let mut push = |n: &Node| {
        let view = NodeView::from(n);
        if !nodes.iter().any(|v| v.id == view.id) {
            nodes.push(view);
        }
    };
    for m in &graph.mentions {
        push(&m.node());
    }
    for t in graph.triples() {
        push(&t.subject);
        push(&t.object);
    }
    let span = |s: kgforge_core::model::Span| SpanView { start: s.start, end: s.end };
    let triples = graph
        .triples()
        .iter()
        .enumerate()
        .map(|(index, t)| TripleView {
            index,
            subject: node_id(&t.subject),
            predicate: PropertyView {
                iri: t.predicate.iri.to_string(),
                label: t.predicate.label.clone(),
                description: t.predicate.description.clone(),
            },
            object: node_id(&t.object),
            subject_span: t.provenance.map(|p| span(p.subject)),
            object_span: t.provenance.map(|p| span(p.object)),
        })
        .collect();
    GraphView { source_text: graph.source_text.clone(), nodes, triples }
}

pub fn payload(session: &GraphSession) -> SessionPayload {
    SessionPayload {
        session_id: session.id.clone(),
        revision: session.revision,
        graph: graph_view(&session.graph),
        mentions: session.graph.mentions.iter().map(MentionView::from).collect(),
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)
}

#[derive(Deserialize)]
struct ConstructRequest {
    text: String,
}

async fn construct(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<SessionPayload>> {
    let req: ConstructRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("expected {{\"text\": ...}}: {e}")))?;
    if req.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "text is empty"));
    }
    let len = char_len(&req.text);
    if len > state.max_text_len {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("text has {len} characters, the limit is {}", state.max_text_len),
        ));
    }
    let pipeline = state.pipeline.clone();
    let graph = blocking(move || pipeline.construct(&req.text)).await?.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: e.to_string(),
        stage: Some(e.stage.to_string()),
    })?;
    let store = state.store.clone();
    let session = blocking(move || store.create(graph)).await??;
    Ok(Json(payload(&session)))
}

fn search(state: &AppState, kind: RecordKind, params: &HashMap<String, String>) -> ApiResult<Json<Vec<CandidateView>>> {
    let q = params.get("q").map(|q| q.trim()).filter(|q| !q.is_empty());
    let q = q.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing query parameter q"))?;
    let retrieval = &state.pipeline.config().discovery.retrieval;
    let found = state.pipeline.index().search(kind, q, retrieval);
    Ok(Json(found.iter().map(CandidateView::from).collect()))
}

async fn entities(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<Json<Vec<CandidateView>>> {
    search(&state, RecordKind::Entity, &params)
}

async fn properties(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<Json<Vec<CandidateView>>> {
    search(&state, RecordKind::Property, &params)
}

async fn get_graph(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionPayload>> {
    let store = state.store.clone();
    let session = blocking(move || store.get(&id)).await??;
    Ok(Json(payload(&session)))
}

#[derive(Deserialize)]
struct EditRequest {
    revision: u64,
    edit: serde_json::Value,
}

async fn put_graph(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<SessionPayload>> {
    let req: EditRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("expected {{\"revision\", \"edit\"}}: {e}")))?;
    let edit: Edit = serde_json::from_value(req.edit)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid edit: {e}")))?;
    let (store, pipeline) = (state.store.clone(), state.pipeline.clone());
    let updated = blocking(move || {
        store.update(&id, req.revision, |graph| {
            apply_edit(graph, &edit, pipeline.index(), &pipeline.config().discovery.retrieval)
        })
    })
    .await?;
    match updated {
        Ok(session) => Ok(Json(payload(&session))),
        Err(UpdateError::Store(e)) => Err(e.into()),
        Err(UpdateError::Rejected(e)) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())),
    }
}

async fn download(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = state.store.clone();
    let session = blocking(move || store.get(&id)).await??;
    let body = to_ntriples(&session.graph).map_err(ApiError::internal)?;
    let disposition = format!("attachment; filename=\"graph-{}.nt\"", session.id);
    Ok((
        [
            (header::CONTENT_TYPE, "application/n-triples; charset=utf-8".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        body,
    )
        .into_response())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/construct", post(construct))
        .route("/api/entities", get(entities))
        .route("/api/properties", get(properties))
        .route("/api/graph/{id}", get(get_graph).put(put_graph))
        .route("/api/graph/{id}/ntriples", get(download))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

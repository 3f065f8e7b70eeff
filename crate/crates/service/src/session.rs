//! Graph sessions persisted as one JSON file each.
//!
//! Writes go to a temporary file in the store directory which is then
//! renamed over the session file, so a crash leaves either the old or the
//! new version. Updates of one session are serialized by a per-session lock.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use kgforge_core::model::KnowledgeGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphSession {
    pub id: String,
    pub graph: KnowledgeGraph,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    /// Starts at 0 and grows by one per accepted update.
    pub revision: u64,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("stale revision {given}, current is {current}")]
    Stale { given: u64, current: u64 },
    #[error("session {id}: {source}")]
    Io {
        id: String,
        #[source]
        source: std::io::Error,
    },
    #[error("session {id} is corrupt: {message}")]
    Corrupt { id: String, message: String },
}

/// Outcome of an update callback that rejected the change.
#[derive(Debug, Error)]
pub enum UpdateError<E> {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Rejected(E),
}

pub struct SessionStore {
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

/// Session ids are generated UUIDs; anything else cannot name a file here.
fn valid_id(id: &str) -> bool {
    Uuid::parse_str(id).is_ok()
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|source| StoreError::Io { id: dir.display().to_string(), source })?;
        Ok(Self { dir, locks: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    fn write(&self, session: &GraphSession) -> Result<(), StoreError> {
        let io = |source| StoreError::Io { id: session.id.clone(), source };
        let mut tmp = tempfile::Builder::new().prefix(".session-").suffix(".tmp").tempfile_in(&self.dir).map_err(io)?;
        serde_json::to_writer(&mut tmp, session).map_err(|e| io(e.into()))?;
        tmp.flush().map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(self.path(&session.id)).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn create(&self, graph: KnowledgeGraph) -> Result<GraphSession, StoreError> {
        let now = Utc::now();
        let session =
            GraphSession { id: Uuid::new_v4().to_string(), graph, created_at: now, updated_at: now, revision: 0 };
        self.write(&session)?;
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Result<GraphSession, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let raw = match std::fs::read(self.path(id)) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(source) => return Err(StoreError::Io { id: id.to_string(), source }),
        };
        let mut session: GraphSession = serde_json::from_slice(&raw)
            .map_err(|e| StoreError::Corrupt { id: id.to_string(), message: e.to_string() })?;
        session.graph.normalize();
        Ok(session)
    }

    /// Applies `edit` to the graph if `revision` is current, then persists
    /// the result under the next revision. A rejected edit changes nothing.
    pub fn update<E>(
        &self,
        id: &str,
        revision: u64,
        edit: impl FnOnce(&mut KnowledgeGraph) -> Result<(), E>,
    ) -> Result<GraphSession, UpdateError<E>> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_string()).into());
        }
        let lock = self.lock_for(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut session = self.get(id)?;
        if session.revision != revision {
            return Err(StoreError::Stale { given: revision, current: session.revision }.into());
        }
        edit(&mut session.graph).map_err(UpdateError::Rejected)?;
        session.revision += 1;
        session.updated_at = Utc::now();
        self.write(&session)?;
        Ok(session)
    }
}

//! Error type shared by the pluggable model backends.
//!
//! All backend traits require `Send + Sync` because the pipeline calls them
//! from worker threads. A backend wrapping a model that is not thread-safe
//! should guard it with a `Mutex` internally so calls are serialized.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("backend {backend}: {message}")]
pub struct BackendError {
    pub backend: String,
    pub message: String,
}

impl BackendError {
    pub fn new(backend: impl Into<String>, message: impl Into<String>) -> Self {
        Self { backend: backend.into(), message: message.into() }
    }
}

//! HTTP service and command-line front end of the knowledge graph builder.

pub mod api;
pub mod app;
pub mod config;
pub mod edit;
pub mod remote;
pub mod session;

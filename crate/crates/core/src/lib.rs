pub mod backend;
pub mod discovery;
pub mod eval;
pub mod fusion;
pub mod index;
pub mod model;
pub mod pipeline;
pub mod relation;

//! Library surface of the command-line crate: dataset handling, pipeline
//! orchestration, evaluation, and report aggregation. The `repomend` binary
//! and the corpus generator are thin wrappers over these modules.

pub mod backend;
pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod import_bench;
pub mod metrics;
pub mod pipeline;

//! Core library for resolving repository issue reports with a fixed
//! localize-then-repair pipeline.
//!
//! The pipeline takes an issue description and a repository checkout, narrows
//! the fault down in three hierarchical steps (files, then classes and
//! functions, then concrete edit locations), samples search/replace patches
//! from a language model around those locations, and picks a final patch by
//! filtering and majority voting over normalized patch forms.
//!
//! Everything here is deterministic given a snapshot, a configuration, and a
//! transcript store: the model gateway can answer every request from recorded
//! transcripts, which is how the test corpus runs offline.

pub mod diffs;
pub mod gateway;
pub mod localization;
pub mod prompts;
pub mod python;
pub mod repair;
pub mod selection;
pub mod snapshot;
pub mod structure;

pub use snapshot::{FileContent, RepoSnapshot, SnapshotOptions};
pub use structure::{build_repo_structure, RepoStructureText};

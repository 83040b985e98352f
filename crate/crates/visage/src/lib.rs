//! Filesystem and command-line layer over `visage-core`.
//!
//! The core crate owns every number this pipeline produces; this crate owns
//! every byte that lands on disk: motion and phoneme files, corpus
//! directories, checkpoints, run configuration, evaluation reports, and the
//! `visage` binary gluing them together.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod formats;

pub use error::{CliError, Result};

//! Corpus files, checkpoints, configuration, external providers, the
//! training pipeline and result tables on top of `sumaug-core`.

pub mod checkpoint;
pub mod config;
pub mod fixtures;
pub mod io;
pub mod pipeline;
pub mod provider;
pub mod report;

pub use sumaug_core as core;

//! Data-manipulation kernels for low-resource abstractive summarization.
//!
//! This crate is `no_std` (it only needs `alloc`) and holds everything that is
//! pure computation:
//!
//! - [`corpus`]: multi-review documents, samples and stratified splitting
//! - [`tokenizer`]: whitespace/punctuation tokenizer and vocabulary
//! - [`rouge`]: ROUGE-1/2/L scoring
//! - [`synthesis`]: shuffle, shuffle+mask and paraphrase-based sample synthesis
//! - [`specificity`]: 1–4 specificity scoring and document aggregation
//! - [`curriculum`]: difficulty metrics, bucketing and incremental schedules
//! - [`mixgen`]: hidden-state sample mixing with two-spike expected targets
//! - [`model`]: a small encoder–decoder transformer with manual backprop
//!
//! File formats, external providers, the training pipeline and the CLI live in
//! the `sumaug` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod curriculum;
mod math;
pub mod mixgen;
pub mod model;
pub mod rng;
pub mod rouge;
pub mod specificity;
pub mod synthesis;
pub mod tokenizer;

pub use corpus::{Corpus, CorpusError, Document, Origin, Sample, Split};
pub use rouge::{RougeScore, RougeSuite};
pub use tokenizer::{TokenSeq, Vocab};

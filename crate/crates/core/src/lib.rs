//! Toxicity detection for open-source discussion comments.
//!
//! The pipeline turns each comment into a fixed-width feature vector
//! (baseline scores, psycholinguistic summaries, moral-foundation loadings),
//! trains one of three classifiers, and evaluates them with stratified
//! cross-validation.

pub mod baseline;
pub mod corpus;
pub mod ddr;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod lexicon;
pub mod matrix;
pub mod models;
pub mod par;
pub mod report;
pub mod sentiment;
pub mod synth;
pub mod textprep;

pub use error::{Error, ProviderError, Result};

//! Self-supervised pre-training objectives and their supporting machinery.
//!
//! The crate covers the full data path of a pre-training experiment:
//!
//! * [`corpus`]: document / paragraph / sentence hierarchy and span sampling.
//! * [`tokenizer`]: BPE, WordPiece and UnigramLM vocabularies with greedy and
//!   Viterbi encoding.
//! * [`cluster`]: skip-gram token embeddings and K-means partitioning.
//! * [`corruption`]: MLM, RTS, C-RTS and SLM input corruption, plus the
//!   cluster-pair statistics matrix that drives C-RTS.
//! * [`generators`]: structural example generators (SSP, SP, PSD, MSPP,
//!   SDC, DPC, DSLC, SDS).
//! * [`model`]: a small transformer encoder with hand-written backward passes
//!   and all classification heads.
//! * [`train`]: objective-specific batch construction and the training loop.
//! * [`metrics`]: answer-selection ranking metrics and head cost accounting.

pub mod cluster;
pub mod config;
pub mod corpus;
pub mod corruption;
pub mod error;
pub mod generators;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod tokenizer;
pub mod train;

pub use error::{Error, Result};

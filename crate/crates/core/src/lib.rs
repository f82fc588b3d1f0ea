//! Triplet-loss speech-sequence embeddings (BiLSTM → average pooling → dense →
//! unit sphere), classical BIC / Gaussian-divergence baselines, and the
//! "same/different" and speaker-change-detection evaluation protocols.

pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod nn;
pub mod training;

pub use error::{Error, Result};

//! Group-level decoding of epoched multi-channel recordings.
//!
//! A dilated-convolution classifier (optionally conditioned on learned
//! subject embeddings) is trained per subject or across a group of subjects,
//! and interpreted with permutation feature importance over time, channels
//! and frequency bands.

pub mod dataio;
pub mod error;
pub mod experiments;
pub mod interpret;
pub mod nn;
pub mod preprocess;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};

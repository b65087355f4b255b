//! Text-independent speaker verification on LPC cepstra.
//!
//! The pipeline: [`frontend`] turns audio into per-frame LPC and LPCC,
//! [`features`] applies a parameterization chain (CMS, ACW, lifters, sigma
//! scaling), [`model`] fits covariance speaker models and scores utterances
//! with the arithmetic-harmonic sphericity measure, and [`eval`] sets
//! per-speaker EER thresholds and measures error rates across recording
//! conditions. [`corpus`] reads manifests of real recordings or generates a
//! seeded synthetic corpus.

pub mod audio;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod frontend;
pub mod model;
pub mod pipeline;

pub use error::{Error, Result};

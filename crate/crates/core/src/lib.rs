//! Emotion-intensity regression from text: a small reverse-mode autodiff
//! engine, ridge and neural regressors, embedding loaders, and a seeded
//! evaluation harness built around repeated cross-validation.

pub mod cli;
pub mod data;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod models;
pub mod pipeline;
pub mod seed;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod text;
pub mod training;

pub use error::{Error, Result};

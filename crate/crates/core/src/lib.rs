//! Speaker verification that rejects spoofed speech by gating speaker embeddings with a countermeasure score.
//!
//! A pre-trained countermeasure (CM) embedding drives a CM score that gates
//! the speaker (ASV) embedding of each enrollment/test trial. The crate
//! contains the fusion network with hand-written gradients, the alternating
//! multi-module trainer, trial construction, the SASV evaluation metrics and
//! a synthetic embedding generator with a binary store format.

mod codec;
pub mod config;
pub mod data;
pub mod experiment;
mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod training;
pub mod trials;

pub use error::{DecodeError, DecodeErrorKind, Error, Result, TextError};

//! Online Bayesian models of learner engagement with educational video
//! fragments, built on Wikipedia-based knowledge components.
//!
//! The crate covers the whole pipeline: fragmenting transcripts and ranking
//! entity-linking annotations ([`content`]), joining them with view logs into
//! ordered engagement events ([`corpus`]), the model zoo ([`models`]), and the
//! sequential evaluation harness ([`eval`]).

pub mod content;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod gaussmath;
pub mod models;
pub mod synth;

pub use error::{Error, Result};

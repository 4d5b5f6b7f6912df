//! Deterministic tooling around a content-conditioned rap verse generator.
//!
//! The generator itself is external. This crate prepares its training data
//! ([`stripping`]), measures its outputs ([`metrics`]), picks among its beam
//! hypotheses ([`select`]), post-edits line endings for rhyme ([`enhance`])
//! and wires those steps together ([`pipeline`]).

pub mod corpus;
pub mod enhance;
pub mod metrics;
pub mod phonetics;
pub mod pipeline;
pub mod select;
pub mod stripping;

pub use corpus::{Document, DocumentKind, Line, Verse};
pub use phonetics::Lexicon;

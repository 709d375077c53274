//! Building and scoring multi-round referring and grounding dialogues.
//!
//! The pipeline turns scene graphs into referring and grounding threads,
//! imports and checks multi-round corpora, splits them, and scores model
//! predictions round by round.

pub mod dataset;
pub mod dialogue;
pub mod geometry;
pub mod harness;
pub mod metric;
pub mod similarity;

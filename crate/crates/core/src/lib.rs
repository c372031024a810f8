//! Program graphs for code understanding: a Java-subset parser, the
//! subtoken-augmented AST (S-AST), statement partitioning, a partitioned
//! gated graph network, API-description context building, siamese clone
//! scoring and functionality-disjoint dataset splits.

pub mod bpe;
pub mod dataset;
pub mod ek;
pub mod error;
pub mod frontend;
pub mod fusion;
pub mod gnn;
pub mod partition;
pub mod sast;
pub mod selfcheck;
pub mod synth;
pub mod vocab;

pub use error::{Error, ParseError, Result, Side};

/// Version stamped into every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

//! Computational geometry of free-group automorphisms.
//!
//! The crate bundles exact free-group algebra (reduced words, Whitehead
//! minimization, Stallings subgroup graphs), the Lipschitz geometry of
//! Outer space (marked metric graphs, candidate loops, folding paths and
//! their flaring inequalities), finite-scale coarse geometry diagnostics,
//! primitive-loop graph balls, and exact breadth-first computations in
//! Cayley-graph bundles of free group extensions.

pub mod automorphism;
pub mod bundle;
pub mod coarse;
pub mod config;
pub mod error;
pub mod factor_graphs;
pub mod folding;
pub mod marked_graph;
pub mod outer_space;
pub mod report;
pub mod sample;
pub mod stallings;
pub mod whitehead;
pub mod words;

pub use error::{Error, Result};
pub use words::{ConjugacyClass, Letter, Word};

/// Comparison tolerance for the floating-point side of metric computations.
pub const TOL: f64 = 1e-9;

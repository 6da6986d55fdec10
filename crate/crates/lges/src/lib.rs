//! Score-based causal structure discovery over Markov equivalence classes.
//!
//! The crate implements greedy equivalence search (GES) and its less greedy
//! variants (LGES-0, LGES, LGES+), generalized phase-driven search, operator
//! validity and delta scoring after Chickering's insert/delete calculus,
//! linear-Gaussian BIC and exact d-separation oracle scoring, prior-knowledge
//! prioritization, interventional edge orientation, and a small synthetic
//! benchmark harness.
//!
//! Candidate scoring and benchmark fan-out run data-parallel through rayon by
//! default; build with `--no-default-features` for the sequential fallback.

pub mod graph;
pub mod interventional;
pub mod ops;
mod parallel;
pub mod score;
pub mod search;
pub mod synth;

pub use graph::{GraphError, NodeId, NodeSet, Pdag};
pub use interventional::{i_orient, IMecResult, InterventionEvidence, InterventionFamily};
pub use score::{BicScore, DecomposableScore, GraphScore, OracleScore, ScoreError, SufficientStats};
pub use search::{
    run_search, Algorithm, InsertStrategy, KnowledgeMode, Phases, PriorKnowledge, SearchConfig,
    SearchError, SearchOutcome, SearchTrace,
};

//! Decision procedures for Parikh images (commutative languages) of regular
//! and context-free grammars over small fixed alphabets.
//!
//! A commutative grammar produces multisets of letters instead of strings;
//! its Parikh image `out(G)` is the set of letter-count vectors of complete
//! derivations. This crate provides:
//!
//! * exact integer vector/matrix algebra ([`vecmath`]),
//! * the grammar data model, text format and transformations ([`grammar`]),
//! * the algebraic run/cycle calculus: Euler condition, connectedness,
//!   derivation reconstruction, skeleton decomposition ([`runs`]),
//! * membership and disjointness deciders for regular grammars, plus a
//!   desk-scale exact decider for context-free grammars ([`membership`]),
//! * two-letter lattice geometry: frames, regions and the bounded-equivalence
//!   collapse ([`frames`]),
//! * the two-letter normal form and inclusion/equivalence decision
//!   ([`normalform`]),
//! * brute-force ground truth used to validate everything else ([`oracle`]),
//! * hardness-reduction instance generators ([`reductions`]),
//! * a command-line front end ([`cli`]).
//!
//! Everything is computed in exact integer/rational arithmetic; there is no
//! floating point anywhere in the decision paths.

pub mod cli;
pub mod frames;
pub mod grammar;
pub mod membership;
pub mod normalform;
pub mod oracle;
pub mod reductions;
pub mod runs;
pub mod vecmath;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("matrix is not square ({rows} rows, {cols} columns)")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is degenerate (determinant 0)")]
    Degenerate,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("grammar is not regular")]
    NotRegular,
    #[error("negative entry in {0}")]
    NegativeEntry(String),
    #[error("grammar state dependency graph is cyclic (state {0})")]
    CyclicDependency(String),
    #[error("start state derives a negative total for letter {letter}: {detail}")]
    StartDerivesNegative { letter: String, detail: String },
    #[error("negative output entries remain after elimination: {0}")]
    ResidualNegative(String),
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("bound insufficient: {0}")]
    BoundInsufficient(String),
    #[error("configuration cap exceeded: {0}")]
    CapExceeded(String),
    #[error("invalid run multiset: {0}")]
    InvalidRun(String),
    #[error("integer overflow in {0}")]
    Overflow(String),
    #[error("coefficient cap required for dependent columns")]
    MissingCap,
    #[error("no final transition reachable within {0} steps")]
    NoFinalReachable(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

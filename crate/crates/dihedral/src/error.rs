//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by the exact linear-algebra kernel.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("operation requires field coefficients, got {0}")]
    NotAField(String),
    #[error("operation requires integer coefficients, got {0}")]
    NotIntegerRing(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("coefficient ring mismatch: {0}")]
    RingMismatch(String),
    #[error("{0} is not prime")]
    NotPrime(u64),
}

/// Errors raised by graded-module operations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GradedError {
    #[error("maps live on different modules: {0}")]
    ModuleMismatch(String),
    #[error("bidegree mismatch: expected {expected:?}, got {got:?}")]
    BidegreeMismatch {
        expected: (i64, i64),
        got: (i64, i64),
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Errors raised while assembling chain complexes and structure bundles.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("totalized map does not square to zero at degree {degree} ({nonzero} nonzero entries)")]
    NotADifferential { degree: usize, nonzero: usize },
    #[error("bundle carries no reflection operator")]
    MissingReflection,
    #[error("homotopy-unit data required but absent")]
    MissingHuStructure,
    #[error("homotopy-unit table for the degree-{0} insertion map is absent")]
    MissingTau(usize),
    #[error("involutive partner table {0} is absent")]
    MissingPartner(String),
    #[error("invalid face indices {indices:?} at level {n}")]
    InvalidIndices { n: usize, indices: Vec<usize> },
    #[error("structure relation violated: {0}")]
    StructureInvalid(String),
    #[error(transparent)]
    Graded(#[from] GradedError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Errors raised by homology queries.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HomologyError {
    #[error("degree {requested} lies outside the certified window 0..={window}")]
    WindowExceeded { requested: usize, window: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("long exact sequence is not exact at {0}; this indicates an internal sign bug")]
    NonExactNode(String),
}

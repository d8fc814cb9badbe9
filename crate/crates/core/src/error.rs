//! Error type shared across the workspace.

use thiserror::Error;

/// Everything that can go wrong while loading systems, synthesising gates,
/// simulating circuits, or extracting estimates.
#[derive(Debug, Error)]
pub enum PtqError {
    /// The problem document could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A field of the problem description is inconsistent or out of range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two unperturbed levels are closer than the degeneracy tolerance.
    #[error(
        "degenerate spectrum: levels {level_a} and {level_b} are separated by \
         {gap:.3e}, below the tolerance {tol:.3e}"
    )]
    Degenerate {
        level_a: usize,
        level_b: usize,
        gap: f64,
        tol: f64,
    },

    /// A matrix that must be Hermitian is not.
    #[error("matrix is not Hermitian: max |A - A^H| = {deviation:.3e} exceeds {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },

    /// The dense matrix assembled from the Pauli terms disagrees with the
    /// perturbation matrix given in the problem.
    #[error(
        "pauli_terms do not reproduce the perturbation matrix: \
         max elementwise deviation {deviation:.3e} exceeds {tol:.3e}"
    )]
    PauliMismatch { deviation: f64, tol: f64 },

    /// A Pauli string contains a character outside {{I, X, Y, Z}} or has the
    /// wrong length.
    #[error("invalid Pauli string {string:?}: {reason}")]
    InvalidPauliString { string: String, reason: String },

    /// The Trotter backend was requested but the problem carries no Pauli
    /// decomposition of V.
    #[error("the trotter backend requires pauli_terms in the problem description")]
    MissingPauliTerms,

    /// A nested summation would exceed the configured work budget.
    #[error("summation budget exceeded: {required} terms requested, limit is {limit}")]
    BudgetExceeded { required: u128, limit: u128 },

    /// Perturbed and unperturbed levels could not be matched by eigenvector
    /// overlap; λ is too large for perturbative identification.
    #[error(
        "level matching is ambiguous: best overlap for unperturbed level {level} \
         is {overlap:.3}, below 0.5 (λ too large for perturbative matching)"
    )]
    AmbiguousMatching { level: usize, overlap: f64 },

    /// A state, outcome, or matrix has the wrong dimension.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A circuit failed structural validation.
    #[error("invalid circuit: {}", .violations.join("; "))]
    InvalidCircuit { violations: Vec<String> },

    /// The α constraint system was solved but the residual check failed;
    /// this indicates an arithmetic bug, not bad input.
    #[error("α constraint residual {residual:.3e} exceeds {tol:.3e}")]
    ConstraintResidual { residual: f64, tol: f64 },

    /// Sampling was requested from a state whose norm is not 1.
    #[error("refusing to sample from an unnormalised state: norm = {norm:.12}")]
    UnnormalizedState { norm: f64 },

    /// A term estimate required by the assembly step is missing.
    #[error("missing estimate for term {term}")]
    MissingEstimate { term: String },

    /// An internal cross-check failed (a bug, not bad input).
    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PtqError>;

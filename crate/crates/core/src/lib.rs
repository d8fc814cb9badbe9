//! Quantum-circuit estimation of Rayleigh–Schrödinger perturbation-theory
//! energy corrections, with a classical oracle for verification.
//!
//! The library is organised around a single pipeline:
//!
//! 1. [`system`] loads and validates a perturbed system `H = H0 + λV`,
//!    expressed in the eigenbasis of `H0` (the computational basis).
//! 2. [`oracle`] computes the classical ground truth: corrections
//!    `E_n^(1..4)`, the generic nested sum `ε_n^(m)`, exact diagonalisation
//!    of `H0 + λV`, and the series-expansion bias of the unitary circuits.
//! 3. [`synthesis`] builds the gates: `U_V` (exact exponential, Trotterised,
//!    or linearised) and the controlled-rotation ladder `U_{E^p}` in both the
//!    standard and the improved decomposition.
//! 4. [`builders`] assembles full term circuits over the [`circuit`] IR.
//! 5. [`sim`] evaluates circuits on a dense statevector, with snapshots,
//!    amplitude readout, and seeded shot sampling.
//! 6. [`estimator`] extracts the physical terms from circuit runs and
//!    assembles `E_n^(3)`, `E_n^(4)`.
//! 7. [`complexity`] accounts weighted basic-gate costs of both `U_E`
//!    variants and of the full circuits.

pub mod builders;
pub mod circuit;
pub mod complexity;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod oracle;
pub mod series;
pub mod sim;
pub mod synthesis;
pub mod system;
pub mod terms;

pub use error::{PtqError, Result};

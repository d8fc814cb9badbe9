//! The perturbed-system model: `H = H0 + λV` in the eigenbasis of `H0`.
//!
//! The computational basis IS the unperturbed eigenbasis: a general `H0` is
//! handled by classical pre-diagonalisation ([`diagonalize_h0`]), after which
//! `energies[k]` is the unperturbed energy `E_k^(0)` of basis state `|k⟩` and
//! the perturbation matrix holds `V_mk = ⟨m|V|k⟩` directly. Level indices map
//! to bitstrings little-endian: qubit `j` holds bit `j` of `k`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PtqError, Result};
use crate::linalg;

/// Default lower bound on the minimum pairwise gap of the unperturbed
/// spectrum. Smaller gaps make `arcsin(C/E_nk)` and `1/E_nk` blow up.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

/// Tolerance on `max |V - V^H|` for the perturbation matrix.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Tolerance on the elementwise match between the dense perturbation and the
/// matrix assembled from its Pauli terms.
pub const PAULI_MATCH_TOL: f64 = 1e-10;

/// One term of a Pauli decomposition `V = Σ_i coefficient_i · P_i`.
///
/// Character `j` of the string acts on qubit `j` (little-endian, matching the
/// level-index convention).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub string: String,
}

/// A validated perturbed system. Immutable after construction; safe to share
/// across threads read-only.
#[derive(Debug, Clone)]
pub struct PerturbedSystem {
    n_qubits: u32,
    energies: Vec<f64>,
    perturbation: DMatrix<Complex64>,
    pauli_terms: Option<Vec<PauliTerm>>,
    lambda: f64,
    target_level: usize,
    degeneracy_tol: f64,
}

impl PerturbedSystem {
    /// Builds and validates a system with the default degeneracy tolerance.
    ///
    /// The number of qubits is derived from `energies.len() = 2^N`.
    pub fn new(
        energies: Vec<f64>,
        perturbation: DMatrix<Complex64>,
        lambda: f64,
        target_level: usize,
    ) -> Result<Self> {
        Self::with_degeneracy_tol(energies, perturbation, lambda, target_level, DEFAULT_DEGENERACY_TOL)
    }

    /// Builds and validates a system with an explicit degeneracy tolerance.
    pub fn with_degeneracy_tol(
        energies: Vec<f64>,
        perturbation: DMatrix<Complex64>,
        lambda: f64,
        target_level: usize,
        degeneracy_tol: f64,
    ) -> Result<Self> {
        let m = energies.len();
        if m < 2 || !m.is_power_of_two() {
            return Err(PtqError::InvalidInput(format!(
                "energies must have 2^N entries with N ≥ 1, got {m}"
            )));
        }
        let n_qubits = m.trailing_zeros();
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(PtqError::InvalidInput("energies must be finite".into()));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(PtqError::InvalidInput(format!(
                "lambda must be finite and non-negative, got {lambda}"
            )));
        }
        if target_level >= m {
            return Err(PtqError::InvalidInput(format!(
                "target_level {target_level} out of range for {m} levels"
            )));
        }
        if perturbation.nrows() != m || perturbation.ncols() != m {
            return Err(PtqError::DimensionMismatch {
                expected: m,
                actual: perturbation.nrows().max(perturbation.ncols()),
            });
        }
        if !(degeneracy_tol.is_finite() && degeneracy_tol > 0.0) {
            return Err(PtqError::InvalidInput(format!(
                "degeneracy tolerance must be positive, got {degeneracy_tol}"
            )));
        }

        // The minimum pairwise gap sits between neighbours in sorted order.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| energies[i].total_cmp(&energies[j]));
        for w in order.windows(2) {
            let (a, b) = (w[0], w[1]);
            let gap = (energies[b] - energies[a]).abs();
            if gap <= degeneracy_tol {
                return Err(PtqError::Degenerate {
                    level_a: a.min(b),
                    level_b: a.max(b),
                    gap,
                    tol: degeneracy_tol,
                });
            }
        }

        let herm_dev = linalg::hermiticity_deviation(&perturbation);
        if herm_dev > HERMITICITY_TOL {
            return Err(PtqError::NotHermitian {
                deviation: herm_dev,
                tol: HERMITICITY_TOL,
            });
        }

        Ok(Self {
            n_qubits,
            energies,
            perturbation,
            pauli_terms: None,
            lambda,
            target_level,
            degeneracy_tol,
        })
    }

    /// Attaches a Pauli decomposition of V, validating that its dense
    /// assembly reproduces the perturbation matrix.
    pub fn with_pauli_terms(mut self, terms: Vec<PauliTerm>) -> Result<Self> {
        let m = self.num_levels();
        let n = self.n_qubits as usize;
        let mut assembled = DMatrix::<Complex64>::zeros(m, m);
        for term in &terms {
            if term.string.chars().count() != n {
                return Err(PtqError::InvalidPauliString {
                    string: term.string.clone(),
                    reason: format!("expected length {n}"),
                });
            }
            if !term.coefficient.is_finite() {
                return Err(PtqError::InvalidInput(format!(
                    "non-finite Pauli coefficient {}",
                    term.coefficient
                )));
            }
            assembled += linalg::pauli_string_matrix(&term.string)?
                * Complex64::new(term.coefficient, 0.0);
        }
        let deviation = linalg::max_abs_diff(&assembled, &self.perturbation);
        if deviation > PAULI_MATCH_TOL {
            return Err(PtqError::PauliMismatch {
                deviation,
                tol: PAULI_MATCH_TOL,
            });
        }
        self.pauli_terms = Some(terms);
        Ok(self)
    }

    /// A copy of this system at a different coupling strength. Everything
    /// else (spectrum, V, target level) is unchanged, so only λ is
    /// revalidated.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(PtqError::InvalidInput(format!(
                "lambda must be finite and non-negative, got {lambda}"
            )));
        }
        let mut copy = self.clone();
        copy.lambda = lambda;
        Ok(copy)
    }

    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }

    /// Number of unperturbed levels, `M = 2^N`.
    pub fn num_levels(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, k: usize) -> f64 {
        self.energies[k]
    }

    pub fn perturbation(&self) -> &DMatrix<Complex64> {
        &self.perturbation
    }

    /// Matrix element `V_mk = ⟨m|V|k⟩`.
    pub fn v(&self, m: usize, k: usize) -> Complex64 {
        self.perturbation[(m, k)]
    }

    pub fn pauli_terms(&self) -> Option<&[PauliTerm]> {
        self.pauli_terms.as_deref()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn target_level(&self) -> usize {
        self.target_level
    }

    pub fn degeneracy_tol(&self) -> f64 {
        self.degeneracy_tol
    }

    /// Gap `E_nk = E_n^(0) − E_k^(0)` relative to the target level.
    pub fn gap(&self, k: usize) -> f64 {
        self.energies[self.target_level] - self.energies[k]
    }

    /// Table of `E_nk^power` over `k ≠ n`.
    pub fn gap_table(&self, n: usize, power: u32) -> EnergyGapTable {
        assert!(n < self.num_levels(), "level {n} out of range");
        assert!(power >= 1, "gap power must be at least 1");
        let entries = (0..self.num_levels())
            .filter(|&k| k != n)
            .map(|k| (k, (self.energies[n] - self.energies[k]).powi(power as i32)))
            .collect();
        EnergyGapTable {
            level: n,
            power,
            entries,
        }
    }

    /// Serialises to the problem-file JSON format.
    pub fn to_problem_json(&self) -> String {
        let doc = ProblemDoc {
            n_qubits: self.n_qubits,
            energies: self.energies.clone(),
            perturbation: matrix_to_pairs(&self.perturbation),
            pauli_terms: self.pauli_terms.clone(),
            lambda: self.lambda,
            target_level: self.target_level,
        };
        serde_json::to_string_pretty(&doc).expect("problem document always serialises")
    }
}

/// Powers of energy gaps `E_nk^p` for one target level, `k ≠ n` only.
#[derive(Debug, Clone)]
pub struct EnergyGapTable {
    level: usize,
    power: u32,
    entries: Vec<(usize, f64)>,
}

impl EnergyGapTable {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    /// `(k, E_nk^p)` pairs in ascending k, the target level absent.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// `E_nk^p` for one level; `None` at `k = n`.
    pub fn gap(&self, k: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|&&(level, _)| level == k)
            .map(|&(_, g)| g)
    }

    /// Smallest magnitude over the table; this is the constant `C` of the
    /// `U_{E^p}` synthesis.
    pub fn min_abs(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, g)| g.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Serialize, Deserialize)]
struct ProblemDoc {
    n_qubits: u32,
    energies: Vec<f64>,
    perturbation: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pauli_terms: Option<Vec<PauliTerm>>,
    lambda: f64,
    target_level: usize,
}

fn matrix_to_pairs(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Parses and validates a problem document (see the README for the format).
pub fn load_system(document: &str) -> Result<PerturbedSystem> {
    let doc: ProblemDoc =
        serde_json::from_str(document).map_err(|e| PtqError::Parse(e.to_string()))?;
    if doc.n_qubits == 0 || doc.n_qubits > 20 {
        return Err(PtqError::InvalidInput(format!(
            "n_qubits must be in 1..=20, got {}",
            doc.n_qubits
        )));
    }
    let m = 1usize << doc.n_qubits;
    if doc.energies.len() != m {
        return Err(PtqError::InvalidInput(format!(
            "expected {} energies for {} qubits, got {}",
            m,
            doc.n_qubits,
            doc.energies.len()
        )));
    }
    if doc.perturbation.len() != m || doc.perturbation.iter().any(|row| row.len() != m) {
        return Err(PtqError::InvalidInput(format!(
            "perturbation must be a {m}×{m} matrix of [re, im] pairs"
        )));
    }
    let matrix = DMatrix::from_fn(m, m, |i, j| {
        let [re, im] = doc.perturbation[i][j];
        Complex64::new(re, im)
    });
    let system = PerturbedSystem::new(doc.energies, matrix, doc.lambda, doc.target_level)?;
    match doc.pauli_terms {
        Some(terms) => system.with_pauli_terms(terms),
        None => Ok(system),
    }
}

/// Classically diagonalises an unperturbed Hamiltonian.
///
/// Returns ascending eigenvalues and the unitary `T` with `T·H0·T† = diag`,
/// i.e. row `k` of `T` is `⟨ψ_k^(0)|`, so `T|ψ_k^(0)⟩ = |k⟩`. Rewriting the
/// perturbation as `T·V·T†` puts the whole problem in the computational
/// basis, which is what every circuit here assumes.
pub fn diagonalize_h0(h0: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let deviation = linalg::hermiticity_deviation(h0);
    if deviation > HERMITICITY_TOL {
        return Err(PtqError::NotHermitian {
            deviation,
            tol: HERMITICITY_TOL,
        });
    }
    let (values, q) = linalg::hermitian_eigen(h0)?;
    Ok((values, q.adjoint()))
}

//! Synthesis of the two gate families the circuits are made of: the
//! gap-encoding rotations `U_{E^p}` (standard and improved decompositions)
//! and the perturbation propagator `U_V` (exact exponential, Trotterized, or
//! the deliberately non-unitary linearized evaluator).
//!
//! `U_{E^p}` acts on the system register plus one fresh ancilla as
//!
//! ```text
//! |k⟩|0⟩ → |k⟩(√(1 − C²/E_nk^{2p}) |0⟩ + C/E_nk^p |1⟩)   for k ≠ n,
//! |n⟩|0⟩ → |n⟩|0⟩,
//! ```
//!
//! i.e. a rotation Ry(θ_k) with θ_k = 2·arcsin(C/E_nk^p) selected by the
//! system basis state. The standard decomposition spends one fully-controlled
//! rotation per level; the improved one re-parameterizes over the subset
//! lattice so gate x only needs controls on its set bits.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::circuit::Gate;
use crate::error::{PtqError, Result};
use crate::linalg::{expm_i_hermitian, pauli_string_matrix};
use crate::system::PerturbedSystem;

/// Which `U_{E^p}` decomposition to synthesize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UeVariant {
    /// One fully-controlled Ry per level (2^N gates, N controls each).
    Standard,
    /// One multi-controlled Ry per bitmask, controlled on set bits only.
    Improved,
}

impl fmt::Display for UeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UeVariant::Standard => write!(f, "standard"),
            UeVariant::Improved => write!(f, "improved"),
        }
    }
}

impl FromStr for UeVariant {
    type Err = PtqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(UeVariant::Standard),
            "improved" => Ok(UeVariant::Improved),
            other => Err(PtqError::Parse(format!(
                "unknown U_E variant {other:?} (expected standard|improved)"
            ))),
        }
    }
}

/// How to realize `U_V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UvBackend {
    /// Dense `e^{iλV}` via eigendecomposition.
    Exact,
    /// First-order product formula with the given step count.
    Trotter(u32),
    /// `I + iλV`, non-unitary; the reference evaluator with zero
    /// series-truncation bias.
    Linearized,
}

impl fmt::Display for UvBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UvBackend::Exact => write!(f, "exact"),
            UvBackend::Trotter(r) => write!(f, "trotter:{r}"),
            UvBackend::Linearized => write!(f, "linearized"),
        }
    }
}

impl FromStr for UvBackend {
    type Err = PtqError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            return Ok(UvBackend::Exact);
        }
        if s == "linearized" {
            return Ok(UvBackend::Linearized);
        }
        if let Some(steps) = s.strip_prefix("trotter:") {
            let r: u32 = steps.parse().map_err(|_| {
                PtqError::Parse(format!("bad Trotter step count {steps:?}"))
            })?;
            if r == 0 {
                return Err(PtqError::Parse("Trotter step count must be ≥ 1".into()));
            }
            return Ok(UvBackend::Trotter(r));
        }
        Err(PtqError::Parse(format!(
            "unknown U_V backend {s:?} (expected exact|trotter:<r>|linearized)"
        )))
    }
}

/// The rotation angles of a standard `U_{E^p}` for one (n, p) pair, together
/// with the constant C they encode.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTable {
    n: usize,
    p: u32,
    c: f64,
    thetas: Vec<f64>,
}

impl ThetaTable {
    pub fn level(&self) -> usize {
        self.n
    }

    pub fn power(&self) -> u32 {
        self.p
    }

    /// The amplitude constant: the largest value keeping every
    /// `C/E_nk^p` within [−1, 1], i.e. the minimum gap magnitude to the p-th
    /// power.
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.thetas[k]
    }
}

/// Rotation angles of the improved decomposition, indexed by control bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTable {
    alphas: Vec<f64>,
}

impl AlphaTable {
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha(&self, x: usize) -> f64 {
        self.alphas[x]
    }

    /// `max_x |Σ_{y ⊆ x} α_y − θ_x|`, evaluated by a subset zeta transform —
    /// the inverse lattice pass to the one that built the table, so the two
    /// cross-check each other.
    pub fn max_constraint_residual(&self, thetas: &ThetaTable) -> f64 {
        let mut sums = self.alphas.clone();
        let n_bits = sums.len().trailing_zeros();
        for b in 0..n_bits {
            for x in 0..sums.len() {
                if x & (1 << b) != 0 {
                    sums[x] += sums[x ^ (1 << b)];
                }
            }
        }
        sums.iter()
            .zip(thetas.thetas())
            .map(|(s, t)| (s - t).abs())
            .fold(0.0, f64::max)
    }
}

/// The largest admissible rotation constant for `U_{E^p}` at level n:
/// `C = min_{k≠n} |E_nk|^p` (always positive).
pub fn select_c(sys: &PerturbedSystem, n: usize, p: u32) -> f64 {
    sys.gap_table(n, p).min_abs()
}

/// Builds the θ table: `θ_k = 2·arcsin(C/E_nk^p)` for k ≠ n, `θ_n = 0` so the
/// target level passes through untouched.
pub fn theta_angles(sys: &PerturbedSystem, n: usize, p: u32) -> Result<ThetaTable> {
    let table = sys.gap_table(n, p);
    let c = table.min_abs();
    let mut thetas = vec![0.0; sys.num_levels()];
    for &(k, gap_p) in table.entries() {
        let ratio = c / gap_p;
        // C is the minimum magnitude over the same entries, so |ratio| ≤ 1
        // exactly; anything else is an arithmetic bug.
        if ratio.abs() > 1.0 {
            return Err(PtqError::Internal(format!(
                "|C/E_nk^p| = {} > 1 for k = {k}: amplitude constant inconsistent",
                ratio.abs()
            )));
        }
        thetas[k] = 2.0 * ratio.asin();
    }
    Ok(ThetaTable { n, p, c, thetas })
}

/// Solves the improved-decomposition angle system: gate y (controlled on the
/// set bits of y) fires for every basis state x ⊇ y, so the angles must
/// satisfy `Σ_{y ⊆ x} α_y = θ_x` for all x. Möbius inversion on the subset
/// lattice gives the unique solution, verified post-hoc to 1e-12.
pub fn solve_alpha(thetas: &ThetaTable) -> Result<AlphaTable> {
    let m = thetas.thetas().len();
    debug_assert!(m.is_power_of_two());
    let n_bits = m.trailing_zeros();
    let mut alphas = thetas.thetas().to_vec();
    for b in 0..n_bits {
        for x in 0..m {
            if x & (1 << b) != 0 {
                alphas[x] -= alphas[x ^ (1 << b)];
            }
        }
    }
    let table = AlphaTable { alphas };
    let residual = table.max_constraint_residual(thetas);
    const TOL: f64 = 1e-12;
    if residual > TOL {
        return Err(PtqError::ConstraintResidual { residual, tol: TOL });
    }
    Ok(table)
}

/// Synthesizes one `U_{E^p}` fragment: gates on the system register
/// controlling a rotation of `ancilla`. Gates with angle exactly 0 (always
/// including the k = n branch) are kept in the list — the simulator skips
/// them and the cost model charges them nothing — so the gate count stays
/// interpretable.
pub fn build_ue(
    sys: &PerturbedSystem,
    n: usize,
    p: u32,
    variant: UeVariant,
    ancilla: usize,
) -> Result<Vec<Gate>> {
    let thetas = theta_angles(sys, n, p)?;
    let all_system: u64 = (1 << sys.n_qubits()) - 1;
    match variant {
        UeVariant::Standard => Ok((0..sys.num_levels())
            .map(|k| Gate::mc_ry(ancilla, thetas.theta(k), all_system, k as u64))
            .collect()),
        UeVariant::Improved => {
            let alphas = solve_alpha(&thetas)?;
            Ok((0..sys.num_levels())
                .map(|x| {
                    if x == 0 {
                        Gate::ry(ancilla, alphas.alpha(0))
                    } else {
                        Gate::mc_ry(ancilla, alphas.alpha(x), x as u64, x as u64)
                    }
                })
                .collect())
        }
    }
}

/// Synthesizes `U_V` as a single dense system-register gate.
pub fn build_uv(sys: &PerturbedSystem, backend: UvBackend) -> Result<Gate> {
    let lambda = sys.lambda();
    match backend {
        UvBackend::Exact => Ok(Gate::system_unitary(
            expm_i_hermitian(sys.perturbation(), lambda)?,
            true,
            "U_V[exact]",
        )),
        UvBackend::Trotter(r) => {
            if r == 0 {
                return Err(PtqError::InvalidInput("Trotter step count must be ≥ 1".into()));
            }
            let terms = sys.pauli_terms().ok_or(PtqError::MissingPauliTerms)?;
            let dim = sys.num_levels();
            let eye = DMatrix::<Complex64>::identity(dim, dim);
            // One step is the product of single-term exponentials in
            // declaration order (the first term acts first on the state);
            // exp(iθP) = cos(θ)·I + i·sin(θ)·P since P² = I.
            let mut step = eye.clone();
            for term in terms {
                let p = pauli_string_matrix(&term.string)?;
                let theta = lambda * term.coefficient / r as f64;
                let rot = &eye * Complex64::new(theta.cos(), 0.0)
                    + &p * Complex64::new(0.0, theta.sin());
                step = rot * step;
            }
            let mut u = eye;
            for _ in 0..r {
                u = &step * &u;
            }
            Ok(Gate::system_unitary(u, true, &format!("U_V[trotter:{r}]")))
        }
        UvBackend::Linearized => {
            let dim = sys.num_levels();
            let u = DMatrix::<Complex64>::identity(dim, dim)
                + sys.perturbation() * Complex64::new(0.0, lambda);
            Ok(Gate::system_unitary(u, false, "U_V[linearized]"))
        }
    }
}

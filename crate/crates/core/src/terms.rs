//! Shared vocabulary for the perturbation-theory terms a circuit can target.
//!
//! Every term circuit follows the same skeleton: `U_V`, then for each "stage"
//! a `U_{E^p}` onto a fresh ancilla followed by another `U_V` (the
//! first-order-state circuit stops after its single `U_E`). A [`TermKind`]
//! fixes the stage powers, the ancilla count, and the power of λ at which the
//! physical quantity appears in the post-selected amplitude.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::PtqError;
use crate::system::PerturbedSystem;

/// A quantity one of the circuits estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TermKind {
    /// The fully nested sum `ε_n^(m)`, `m ≥ 3`.
    Eps(u32),
    /// `Σ_{k2,k3≠n} V_nk3 V_k3k2 V_k2n / (E²_nk2 E_nk3)`, third term of `E^(4)`.
    MA,
    /// `Σ_{k≠n} |V_nk|² / E²_nk`, second term of `E^(3)`.
    MB,
    /// `Σ_{k≠n} |V_nk|² / E³_nk`, last term of `E^(4)`.
    MC,
    /// `Σ_{k≠n} |V_nk|² / E_nk`, the second-order correction.
    E2,
    /// First-order eigenstate correction, read out as amplitudes rather than
    /// a single scalar.
    State1,
}

impl TermKind {
    /// The six scalar terms needed to assemble `E^(3)` and `E^(4)`.
    pub fn all_scalar() -> [TermKind; 6] {
        [
            TermKind::Eps(3),
            TermKind::Eps(4),
            TermKind::MA,
            TermKind::MB,
            TermKind::MC,
            TermKind::E2,
        ]
    }

    /// Gap powers of the `U_{E^p}` stages, in circuit order.
    pub fn stage_powers(&self) -> Vec<u32> {
        match self {
            TermKind::Eps(m) => vec![1; (*m as usize).saturating_sub(1)],
            TermKind::MA => vec![2, 1],
            TermKind::MB => vec![2],
            TermKind::MC => vec![3],
            TermKind::E2 => vec![1],
            TermKind::State1 => vec![1],
        }
    }

    /// Number of `U_V` applications in the term circuit.
    pub fn uv_count(&self) -> u32 {
        match self {
            TermKind::State1 => 1,
            other => other.stage_powers().len() as u32 + 1,
        }
    }

    /// Power of λ at which the target quantity appears in the post-selected
    /// amplitude; equals the number of `U_V` applications.
    pub fn signal_order(&self) -> u32 {
        self.uv_count()
    }

    /// Whether the term is a single scalar (everything but `State1`).
    pub fn is_scalar(&self) -> bool {
        !matches!(self, TermKind::State1)
    }
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermKind::Eps(m) => write!(f, "eps{m}"),
            TermKind::MA => write!(f, "m_a"),
            TermKind::MB => write!(f, "m_b"),
            TermKind::MC => write!(f, "m_c"),
            TermKind::E2 => write!(f, "e2"),
            TermKind::State1 => write!(f, "state1"),
        }
    }
}

impl FromStr for TermKind {
    type Err = PtqError;

    fn from_str(s: &str) -> Result<Self, PtqError> {
        match s {
            "m_a" => Ok(TermKind::MA),
            "m_b" => Ok(TermKind::MB),
            "m_c" => Ok(TermKind::MC),
            "e2" => Ok(TermKind::E2),
            "state1" => Ok(TermKind::State1),
            other => {
                if let Some(m) = other.strip_prefix("eps") {
                    let m: u32 = m.parse().map_err(|_| {
                        PtqError::InvalidInput(format!("unknown term {other:?}"))
                    })?;
                    if m < 3 {
                        return Err(PtqError::InvalidInput(format!(
                            "eps order must be at least 3, got {m} (use e2 for the second order)"
                        )));
                    }
                    Ok(TermKind::Eps(m))
                } else {
                    Err(PtqError::InvalidInput(format!("unknown term {other:?}")))
                }
            }
        }
    }
}

impl From<TermKind> for String {
    fn from(kind: TermKind) -> String {
        kind.to_string()
    }
}

impl TryFrom<String> for TermKind {
    type Error = PtqError;

    fn try_from(s: String) -> Result<Self, PtqError> {
        s.parse()
    }
}

/// The factor converting the λ^signal_order coefficient of the post-selected
/// amplitude into the physical term: `i^order · Π_stages C_p`, where `C_p` is
/// the synthesis constant `min_{k≠n} |E_nk|^p`.
pub fn term_prefactor(sys: &PerturbedSystem, kind: TermKind) -> Complex64 {
    let n = sys.target_level();
    let c_product: f64 = kind
        .stage_powers()
        .iter()
        .map(|&p| sys.gap_table(n, p).min_abs())
        .product();
    Complex64::i().powu(kind.signal_order()) * c_product
}
